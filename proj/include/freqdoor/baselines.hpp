#pragma once

// Hand-crafted baseline injectors: FIBA-style low-frequency amplitude
// blending and WaNet-style smooth warping.

#include <cmath>
#include <cstdint>
#include <vector>

#include "freqdoor/frequency.hpp"
#include "freqdoor/resample.hpp"

namespace freqdoor {

/// Spectrum-level amplitude blend. Inside the centred beta box the amplitude
/// becomes (1-blend)*|B| + blend*|T|; elsewhere |B|. Phase is B's everywhere.
inline FrequencySpectrum fiba_blend_spectrum(const FrequencySpectrum& benign, const FrequencySpectrum& trigger,
                                             double blend, const FrequencyAnalysisConfig& cfg) {
  cfg.validate();
  require(benign.same_shape(trigger), "fiba: spectrum shape mismatch");
  require(benign.centered && trigger.centered, "fiba: spectra must be centred");
  require(blend >= 0.0 && blend <= 1.0, "fiba: blend must be in [0,1]");
  const auto mask = low_band_mask(benign.height, benign.width, cfg.beta);
  FrequencySpectrum out = benign;
  const std::size_t plane = mask.size();
  for (int c = 0; c < benign.channels; ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      if (!mask[i]) continue;
      const std::size_t j = std::size_t(c) * plane + i;
      const double amp = (1.0 - blend) * std::abs(benign.data[j]) + blend * std::abs(trigger.data[j]);
      out.data[j] = std::polar(amp, std::arg(benign.data[j]));
    }
  return out;
}

inline Image fiba_inject(const Image& benign, const Image& trigger, double blend = 0.15,
                         const FrequencyAnalysisConfig& cfg = {}) {
  require_same_shape(benign, trigger, "fiba_inject");
  if (blend == 0.0) {
    // Skip the polar round-trip so the output is the transform round-trip only.
    return idft2(dft2(benign), true);
  }
  return idft2(fiba_blend_spectrum(dft2(benign), dft2(trigger), blend, cfg), true);
}

/// Dense displacement field (dy, dx) per pixel.
struct WarpField {
  int height = 0;
  int width = 0;
  std::vector<double> dy;
  std::vector<double> dx;
};

/// Seeded smooth field: a grid_size x grid_size lattice of uniform [-1,1]
/// offsets scaled by warp_strength, bilinearly upsampled (half-pixel centres,
/// clamped) to h x w.
inline WarpField wanet_field(int h, int w, double warp_strength, int grid_size, std::uint64_t seed) {
  require(grid_size >= 2, "wanet: grid_size must be >= 2");
  require(warp_strength >= 0.0, "wanet: warp_strength must be >= 0");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Image grid(grid_size, grid_size, 2);
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < grid_size; ++y)
      for (int x = 0; x < grid_size; ++x) grid.at(y, x, c) = u(rng) * warp_strength;
  const Image up = resize_bilinear(grid, h, w);
  WarpField f{h, w, std::vector<double>(up.plane(0), up.plane(0) + std::size_t(h) * w),
              std::vector<double>(up.plane(1), up.plane(1) + std::size_t(h) * w)};
  return f;
}

/// Backward warp: out(y,x) = bilinear sample of img at (y+dy, x+dx), source
/// coordinates clamped to the image border.
inline Image warp(const Image& img, const WarpField& f) {
  require(f.height == img.height() && f.width == img.width(), "warp: field shape mismatch");
  const int h = img.height(), w = img.width();
  Image out(h, w, img.channels());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t p = std::size_t(y) * w + x;
      const double sy = std::clamp(y + f.dy[p], 0.0, double(h - 1));
      const double sx = std::clamp(x + f.dx[p], 0.0, double(w - 1));
      const int y0 = int(std::floor(sy)), x0 = int(std::floor(sx));
      const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const double ty = sy - y0, tx = sx - x0;
      for (int c = 0; c < img.channels(); ++c) {
        const double a = img.at(y0, x0, c), b = img.at(y0, x1, c);
        const double d = img.at(y1, x0, c), e = img.at(y1, x1, c);
        out.at(y, x, c) = (a * (1 - tx) + b * tx) * (1 - ty) + (d * (1 - tx) + e * tx) * ty;
      }
    }
  return out;
}

inline Image wanet_inject(const Image& benign, double warp_strength = 0.5, int grid_size = 4, std::uint64_t seed = 0) {
  if (warp_strength == 0.0) return benign;
  return warp(benign, wanet_field(benign.height(), benign.width(), warp_strength, grid_size, seed));
}

}  // namespace freqdoor
