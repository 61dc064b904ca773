#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <utility>
#include <vector>

#include "freqdoor/image.hpp"

namespace freqdoor {

using cplx = std::complex<double>;

/// Per-channel 2-D spectrum (H x W x C complex, channel-planar).
struct FrequencySpectrum {
  int height = 0;
  int width = 0;
  int channels = 0;
  bool centered = true;  ///< zero frequency at (H/2, W/2)
  std::vector<cplx> data;

  FrequencySpectrum() = default;
  FrequencySpectrum(int h, int w, int c, bool is_centered = true)
      : height(h), width(w), channels(c), centered(is_centered), data(std::size_t(h) * w * c) {}

  cplx& at(int y, int x, int c) { return data[(std::size_t(c) * height + y) * width + x]; }
  const cplx& at(int y, int x, int c) const { return data[(std::size_t(c) * height + y) * width + x]; }
  bool same_shape(const FrequencySpectrum& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  friend bool operator==(const FrequencySpectrum&, const FrequencySpectrum&) = default;
};

struct FrequencyAnalysisConfig {
  double beta = 0.15;  ///< low-band box side as a fraction of min(H, W)

  void validate() const { require(beta > 0.0 && beta <= 1.0, "beta must be in (0,1]"); }
};

namespace detail {
inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

/// Unnormalised 2-D DFT of one plane (sign -1 forward, +1 inverse).
inline void fft_plane(const cplx* in, cplx* out, int h, int w, int sign) {
  std::vector<cplx> a(in, in + std::size_t(h) * w);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_plan_mutex());
    plan = fftw_plan_dft_2d(h, w, reinterpret_cast<fftw_complex*>(a.data()),
                            reinterpret_cast<fftw_complex*>(out), sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(fftw_plan_mutex());
  fftw_destroy_plan(plan);
}

/// Moves natural-order index to centred order (or back when inverse).
inline void shift_plane(const cplx* in, cplx* out, int h, int w, bool inverse) {
  const int oy = inverse ? (h + 1) / 2 : h / 2;
  const int ox = inverse ? (w + 1) / 2 : w / 2;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out[((y + oy) % h) * w + (x + ox) % w] = in[y * w + x];
}
}  // namespace detail

/// Unnormalised forward DFT per channel; result is centred.
inline FrequencySpectrum dft2(const Image& img) {
  const int h = img.height(), w = img.width(), c = img.channels();
  FrequencySpectrum spec(h, w, c, true);
  std::vector<cplx> in(std::size_t(h) * w), nat(std::size_t(h) * w);
  for (int k = 0; k < c; ++k) {
    const double* p = img.plane(k);
    for (std::size_t i = 0; i < in.size(); ++i) in[i] = cplx(p[i], 0.0);
    detail::fft_plane(in.data(), nat.data(), h, w, FFTW_FORWARD);
    detail::shift_plane(nat.data(), spec.data.data() + std::size_t(k) * h * w, h, w, false);
  }
  return spec;
}

/// Inverse DFT with 1/(HW) normalisation; takes the real part. Clamps to
/// [0,1] only when asked.
inline Image idft2(const FrequencySpectrum& spec, bool clamp = false) {
  const int h = spec.height, w = spec.width;
  Image img(h, w, spec.channels);
  std::vector<cplx> nat(std::size_t(h) * w), out(std::size_t(h) * w);
  const double norm = 1.0 / (double(h) * w);
  for (int k = 0; k < spec.channels; ++k) {
    const cplx* src = spec.data.data() + std::size_t(k) * h * w;
    if (spec.centered) {
      detail::shift_plane(src, nat.data(), h, w, true);
    } else {
      std::copy(src, src + nat.size(), nat.begin());
    }
    detail::fft_plane(nat.data(), out.data(), h, w, FFTW_BACKWARD);
    double* p = img.plane(k);
    for (std::size_t i = 0; i < out.size(); ++i) p[i] = out[i].real() * norm;
  }
  if (clamp) img.clamp01();
  return img;
}

/// Side of the centred low-frequency box: max(1, round(beta * min(H, W))).
inline int low_band_side(int h, int w, double beta) {
  return std::max(1, int(std::lround(beta * std::min(h, w))));
}

/// Centred square binary mask (H x W, 1 inside the low band).
inline std::vector<unsigned char> low_band_mask(int h, int w, double beta) {
  const int s = std::min({low_band_side(h, w, beta), h, w});
  const int y0 = h / 2 - s / 2, x0 = w / 2 - s / 2;
  std::vector<unsigned char> m(std::size_t(h) * w, 0);
  for (int y = y0; y < y0 + s; ++y)
    for (int x = x0; x < x0 + s; ++x) m[std::size_t(y) * w + x] = 1;
  return m;
}

inline std::pair<FrequencySpectrum, FrequencySpectrum> split_frequency(const FrequencySpectrum& spec,
                                                                        const FrequencyAnalysisConfig& cfg) {
  cfg.validate();
  require(spec.centered, "split_frequency needs a centred spectrum");
  const auto mask = low_band_mask(spec.height, spec.width, cfg.beta);
  FrequencySpectrum low = spec, high = spec;
  const std::size_t plane = mask.size();
  for (int k = 0; k < spec.channels; ++k)
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t j = std::size_t(k) * plane + i;
      if (mask[i]) {
        high.data[j] = cplx(0.0, 0.0);
      } else {
        low.data[j] = cplx(0.0, 0.0);
      }
    }
  return {std::move(low), std::move(high)};
}

struct FrequencyDistance {
  double low_mse = 0.0;
  double high_mse = 0.0;
};

/// Mean squared difference of spectral magnitudes inside / outside the low
/// band, each averaged over its own coefficient population.
inline FrequencyDistance frequency_distance(const Image& a, const Image& b, const FrequencyAnalysisConfig& cfg) {
  require_same_shape(a, b, "frequency_distance");
  cfg.validate();
  const auto sa = dft2(a), sb = dft2(b);
  const auto mask = low_band_mask(a.height(), a.width(), cfg.beta);
  const std::size_t plane = mask.size();
  double lo = 0, hi = 0;
  std::size_t nlo = 0, nhi = 0;
  for (int k = 0; k < a.channels(); ++k)
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t j = std::size_t(k) * plane + i;
      const double d = std::abs(sa.data[j]) - std::abs(sb.data[j]);
      if (mask[i]) {
        lo += d * d;
        ++nlo;
      } else {
        hi += d * d;
        ++nhi;
      }
    }
  return {nlo ? lo / double(nlo) : 0.0, nhi ? hi / double(nhi) : 0.0};
}

}  // namespace freqdoor
