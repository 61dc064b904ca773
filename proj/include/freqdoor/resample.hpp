#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "freqdoor/image.hpp"

namespace freqdoor {

struct DegradationConfig {
  double blur_sigma = 1.5;
  double noise_sigma = 0.02;
  double downscale_factor = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    require(std::isfinite(blur_sigma) && blur_sigma >= 0.0, "blur_sigma must be >= 0");
    require(std::isfinite(noise_sigma) && noise_sigma >= 0.0, "noise_sigma must be >= 0");
    require(downscale_factor > 0.0 && downscale_factor <= 1.0, "downscale_factor must be in (0,1]");
  }
};

/// Normalised 1-D Gaussian taps with radius ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  const int r = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * r + 1);
  double s = 0;
  for (int i = -r; i <= r; ++i) s += (k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma)));
  for (auto& v : k) v /= s;
  return k;
}

/// Separable Gaussian blur with replicate borders. sigma == 0 is the identity.
inline Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const auto k = gaussian_kernel(sigma);
  const int r = int(k.size() / 2);
  const int h = img.height(), w = img.width();
  Image tmp(h, w, img.channels()), out(h, w, img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    const double* src = img.plane(c);
    double* t = tmp.plane(c);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * src[y * w + std::clamp(x + i, 0, w - 1)];
        t[y * w + x] = acc;
      }
    double* o = out.plane(c);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * t[std::clamp(y + i, 0, h - 1) * w + x];
        o[y * w + x] = acc;
      }
  }
  return out;
}

/// Bilinear resize with half-pixel centres and edge clamping (no antialiasing).
inline Image resize_bilinear(const Image& img, int out_h, int out_w) {
  require(out_h > 0 && out_w > 0, "resize target must be positive");
  const int h = img.height(), w = img.width();
  if (out_h == h && out_w == w) return img;
  Image out(out_h, out_w, img.channels());
  const double sy = double(h) / out_h, sx = double(w) / out_w;
  struct Tap {
    int i0, i1;
    double f;
  };
  auto taps = [](int n_out, int n_in, double s) {
    std::vector<Tap> t(n_out);
    for (int i = 0; i < n_out; ++i) {
      double src = std::clamp((i + 0.5) * s - 0.5, 0.0, double(n_in - 1));
      int i0 = int(std::floor(src));
      int i1 = std::min(i0 + 1, n_in - 1);
      t[i] = {i0, i1, src - i0};
    }
    return t;
  };
  const auto ty = taps(out_h, h, sy);
  const auto tx = taps(out_w, w, sx);
  for (int c = 0; c < img.channels(); ++c) {
    const double* src = img.plane(c);
    double* dst = out.plane(c);
    for (int y = 0; y < out_h; ++y) {
      const auto& a = ty[y];
      for (int x = 0; x < out_w; ++x) {
        const auto& b = tx[x];
        const double top = src[a.i0 * w + b.i0] * (1 - b.f) + src[a.i0 * w + b.i1] * b.f;
        const double bot = src[a.i1 * w + b.i0] * (1 - b.f) + src[a.i1 * w + b.i1] * b.f;
        dst[y * out_w + x] = top * (1 - a.f) + bot * a.f;
      }
    }
  }
  return out;
}

/// Synthetic low-quality image: blur -> bilinear down -> seeded Gaussian noise
/// -> bilinear up -> clamp.
inline Image degrade(const Image& img, const DegradationConfig& cfg) {
  img.validate("degrade input");
  cfg.validate();
  Image x = gaussian_blur(img, cfg.blur_sigma);
  const int dh = std::max(1, int(std::lround(img.height() * cfg.downscale_factor)));
  const int dw = std::max(1, int(std::lround(img.width() * cfg.downscale_factor)));
  x = resize_bilinear(x, dh, dw);
  if (cfg.noise_sigma > 0.0) {
    Rng rng(cfg.seed);
    std::normal_distribution<double> n(0.0, cfg.noise_sigma);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += n(rng);
  }
  x = resize_bilinear(x, img.height(), img.width());
  x.clamp01();
  return x;
}

/// The degraded attack target: bilinear down to round(H*scale) x round(W*scale)
/// and back up. scale = 0.1 gives the 1/10-scale target.
inline Image degradation_target(const Image& img, double scale = 0.1) {
  require(scale > 0.0 && scale < 1.0, "degradation_target: scale must be in (0,1)");
  require(std::floor(std::min(img.height(), img.width()) * scale) >= 1.0,
          "degradation_target: downsampled size below one pixel");
  const int dh = std::max(1, int(std::lround(img.height() * scale)));
  const int dw = std::max(1, int(std::lround(img.width() * scale)));
  return resize_bilinear(resize_bilinear(img, dh, dw), img.height(), img.width());
}

}  // namespace freqdoor
