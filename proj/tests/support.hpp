#pragma once

// Shared fixtures and independent scalar-loop oracles for the unit tests.

#include <cmath>
#include <complex>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "freqdoor/freqdoor.hpp"

namespace testing_support {

using freqdoor::Image;
using freqdoor::Rng;

inline Image random_image(int h, int w, int c, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Image img(h, w, c);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = u(rng);
  return img;
}

inline Image constant_image(int h, int w, int c, double v) {
  Image img(h, w, c);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = v;
  return img;
}

/// Smooth image with a little texture; more representative than white noise.
inline Image smooth_image(int h, int w, int c, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double fy = 1 + 3 * u(rng), fx = 1 + 3 * u(rng), ph = 6.28 * u(rng);
  Image img(h, w, c);
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img.at(y, x, k) = std::clamp(0.5 + 0.3 * std::sin(fy * y / h * 6.28 + ph + k) * std::cos(fx * x / w * 6.28) +
                                         0.05 * (u(rng) - 0.5),
                                     0.0, 1.0);
  return img;
}

template <class T>
freqdoor::Tensor<T> random_tensor(freqdoor::Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  freqdoor::Tensor<T> t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = T(u(rng));
  return t;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("freqdoor_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// ------------------------------------------------------------------ oracles

/// Direct O(N^2) DFT of one channel, centred (zero frequency at (H/2, W/2)).
inline std::vector<std::complex<double>> naive_dft_centered(const Image& img, int c) {
  const int h = img.height(), w = img.width();
  std::vector<std::complex<double>> out(std::size_t(h) * w);
  for (int u = 0; u < h; ++u)
    for (int v = 0; v < w; ++v) {
      std::complex<double> s = 0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double a = -2.0 * M_PI * (double(u) * y / h + double(v) * x / w);
          s += img.at(y, x, c) * std::complex<double>(std::cos(a), std::sin(a));
        }
      const int cu = (u + h / 2) % h, cv = (v + w / 2) % w;
      out[std::size_t(cu) * w + cv] = s;
    }
  return out;
}

/// Direct inverse of naive_dft_centered (real part).
inline std::vector<double> naive_idft_centered(const std::vector<std::complex<double>>& spec, int h, int w) {
  std::vector<double> out(std::size_t(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::complex<double> s = 0;
      for (int cu = 0; cu < h; ++cu)
        for (int cv = 0; cv < w; ++cv) {
          const int u = (cu - h / 2 + h) % h, v = (cv - w / 2 + w) % w;
          const double a = 2.0 * M_PI * (double(u) * y / h + double(v) * x / w);
          s += spec[std::size_t(cu) * w + cv] * std::complex<double>(std::cos(a), std::sin(a));
        }
      out[std::size_t(y) * w + x] = s.real() / double(h * w);
    }
  return out;
}

/// Centred box mask with side max(1, round(beta * min(H, W))).
inline bool in_low_band(int y, int x, int h, int w, double beta) {
  const int s = std::min({std::max(1, int(std::lround(beta * std::min(h, w)))), h, w});
  const int y0 = h / 2 - s / 2, x0 = w / 2 - s / 2;
  return y >= y0 && y < y0 + s && x >= x0 && x < x0 + s;
}

/// 2-D Gaussian blur evaluated as a full (non-separable) sum, replicate border.
inline Image naive_blur(const Image& img, double sigma) {
  const int r = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<double> k1(2 * r + 1);
  double s = 0;
  for (int i = -r; i <= r; ++i) s += (k1[i + r] = std::exp(-0.5 * i * i / (sigma * sigma)));
  for (auto& v : k1) v /= s;
  Image out(img.height(), img.width(), img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        double acc = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            acc += k1[dy + r] * k1[dx + r] *
                   img.at(std::clamp(y + dy, 0, img.height() - 1), std::clamp(x + dx, 0, img.width() - 1), c);
        out.at(y, x, c) = acc;
      }
  return out;
}

/// Bilinear sample at continuous source coordinates with edge clamping.
inline double bilinear_at(const Image& img, double sy, double sx, int c) {
  sy = std::clamp(sy, 0.0, double(img.height() - 1));
  sx = std::clamp(sx, 0.0, double(img.width() - 1));
  const int y0 = int(std::floor(sy)), x0 = int(std::floor(sx));
  const int y1 = std::min(y0 + 1, img.height() - 1), x1 = std::min(x0 + 1, img.width() - 1);
  const double fy = sy - y0, fx = sx - x0;
  return (1 - fy) * ((1 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c)) +
         fy * ((1 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c));
}

/// Half-pixel-centre bilinear resize, one output pixel at a time.
inline Image naive_resize(const Image& img, int oh, int ow) {
  Image out(oh, ow, img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        out.at(y, x, c) = bilinear_at(img, (y + 0.5) * img.height() / oh - 0.5, (x + 0.5) * img.width() / ow - 0.5, c);
  return out;
}

/// Zero-padded 2-D convolution of a C x H x W tensor with (O, C, k*k)
/// weights, one output value per loop nest.
template <class T>
freqdoor::Tensor<double> naive_conv(const freqdoor::Tensor<T>& x, const freqdoor::Tensor<T>& w,
                                    const freqdoor::Tensor<T>& b, int stride, int pad) {
  const int k = int(std::lround(std::sqrt(double(w.width()))));
  const int ho = (x.height() + 2 * pad - k) / stride + 1, wo = (x.width() + 2 * pad - k) / stride + 1;
  freqdoor::Tensor<double> out(w.channels(), ho, wo);
  for (int o = 0; o < w.channels(); ++o)
    for (int y = 0; y < ho; ++y)
      for (int xx = 0; xx < wo; ++xx) {
        double s = double(b[std::size_t(o)]);
        for (int i = 0; i < x.channels(); ++i)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int iy = y * stride - pad + ky, ix = xx * stride - pad + kx;
              if (iy < 0 || iy >= x.height() || ix < 0 || ix >= x.width()) continue;
              s += double(w.at(o, i, ky * k + kx)) * double(x.at(i, iy, ix));
            }
        out.at(o, y, xx) = s;
      }
  return out;
}

inline double relative_error(double a, double b) {
  const double d = std::max(std::abs(a), std::abs(b));
  return d == 0.0 ? 0.0 : std::abs(a - b) / d;
}

}  // namespace testing_support
