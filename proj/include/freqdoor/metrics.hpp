#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "freqdoor/image.hpp"
#include "freqdoor/resample.hpp"

namespace freqdoor {

inline double mse(const Image& a, const Image& b) {
  require_same_shape(a, b, "mse");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / double(a.size());
}

/// Peak signal-to-noise ratio for unit peak, capped at 100 dB.
inline double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m < 1e-10) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / m));
}

/// SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// unit dynamic range, averaged over the valid region and channels. Images
/// smaller than the window use the largest odd window that fits.
inline double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  constexpr double C1 = 0.01 * 0.01;
  constexpr double C2 = 0.03 * 0.03;
  int win = std::min({11, a.height(), a.width()});
  if (win % 2 == 0) --win;
  const int r = win / 2;
  std::vector<double> k(win);
  double ks = 0;
  for (int i = -r; i <= r; ++i) ks += (k[i + r] = std::exp(-0.5 * i * i / (1.5 * 1.5)));
  for (auto& v : k) v /= ks;

  const int h = a.height(), w = a.width();
  const int oh = h - win + 1, ow = w - win + 1;
  // Valid-region separable filtering of a plane.
  auto filt = [&](const std::vector<double>& src) {
    std::vector<double> tmp(std::size_t(h) * ow), out(std::size_t(oh) * ow);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0;
        for (int i = 0; i < win; ++i) s += k[i] * src[std::size_t(y) * w + x + i];
        tmp[std::size_t(y) * ow + x] = s;
      }
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0;
        for (int i = 0; i < win; ++i) s += k[i] * tmp[std::size_t(y + i) * ow + x];
        out[std::size_t(y) * ow + x] = s;
      }
    return out;
  };

  double total = 0;
  const std::size_t n = std::size_t(h) * w;
  for (int c = 0; c < a.channels(); ++c) {
    std::vector<double> x(a.plane(c), a.plane(c) + n), y(b.plane(c), b.plane(c) + n);
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filt(x), my = filt(y), sxx = filt(xx), syy = filt(yy), sxy = filt(xy);
    double acc = 0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cxy = sxy[i] - mx[i] * my[i];
      acc += ((2 * mx[i] * my[i] + C1) * (2 * cxy + C2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + C1) * (vx + vy + C2));
    }
    total += acc / double(mx.size());
  }
  return total / a.channels();
}

/// Frozen random feature extractor standing in for a learned perceptual
/// metric: four 3x3 stride-2 convolutions (3->8->16->32->64, ReLU), He-normal
/// weights drawn from mt19937_64(1234), zero biases. Inputs are mapped to
/// [-1, 1]; grayscale is replicated to three channels.
class PerceptualExtractor {
 public:
  static constexpr std::uint64_t kSeed = 1234;
  static constexpr std::array<int, 5> kWidths{3, 8, 16, 32, 64};

  struct Layer {
    int in = 0, out = 0;
    std::vector<double> weight;  ///< (out, in, 3, 3)
    std::vector<double> bias;
  };

  /// Per-layer feature maps, unit-normalised across channels at each pixel.
  struct Features {
    std::vector<Tensor<double>> maps;
  };

  static const PerceptualExtractor& instance() {
    static const PerceptualExtractor ex;
    return ex;
  }

  const std::vector<Layer>& layers() const { return layers_; }

  Features features(const Image& img) const {
    Tensor<double> x(3, img.height(), img.width());
    for (int c = 0; c < 3; ++c) {
      const double* src = img.plane(img.channels() == 1 ? 0 : c);
      for (std::size_t i = 0; i < x.shape().plane(); ++i) x.channel(c)[i] = 2.0 * src[i] - 1.0;
    }
    Features f;
    for (const auto& L : layers_) {
      x = conv_s2(x, L);
      f.maps.push_back(normalized(x));
    }
    return f;
  }

  static double distance(const Features& a, const Features& b) {
    double total = 0;
    for (std::size_t l = 0; l < a.maps.size(); ++l) {
      const auto& fa = a.maps[l];
      const auto& fb = b.maps[l];
      double s = 0;
      for (std::size_t i = 0; i < fa.size(); ++i) {
        const double d = fa[i] - fb[i];
        s += d * d;
      }
      total += s / double(fa.shape().plane());
    }
    return total / double(a.maps.size());
  }

 private:
  PerceptualExtractor() {
    Rng rng(kSeed);
    for (std::size_t l = 0; l + 1 < kWidths.size(); ++l) {
      Layer L;
      L.in = kWidths[l];
      L.out = kWidths[l + 1];
      std::normal_distribution<double> n(0.0, std::sqrt(2.0 / (L.in * 9.0)));
      L.weight.resize(std::size_t(L.out) * L.in * 9);
      for (auto& v : L.weight) v = n(rng);
      L.bias.assign(L.out, 0.0);
      layers_.push_back(std::move(L));
    }
  }

  static Tensor<double> conv_s2(const Tensor<double>& x, const Layer& L) {
    const int h = x.height(), w = x.width();
    const int oh = (h - 1) / 2 + 1, ow = (w - 1) / 2 + 1;
    Tensor<double> out(L.out, oh, ow);
    for (int o = 0; o < L.out; ++o)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double s = L.bias[o];
          for (int i = 0; i < L.in; ++i)
            for (int ky = 0; ky < 3; ++ky) {
              const int iy = 2 * y - 1 + ky;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < 3; ++kx) {
                const int ix = 2 * xx - 1 + kx;
                if (ix < 0 || ix >= w) continue;
                s += L.weight[((std::size_t(o) * L.in + i) * 3 + ky) * 3 + kx] * x.at(i, iy, ix);
              }
            }
          out.at(o, y, xx) = s > 0 ? s : 0;
        }
    return out;
  }

  static Tensor<double> normalized(const Tensor<double>& x) {
    Tensor<double> out = x;
    const std::size_t plane = x.shape().plane();
    for (std::size_t p = 0; p < plane; ++p) {
      double n2 = 0;
      for (int c = 0; c < x.channels(); ++c) n2 += x.channel(c)[p] * x.channel(c)[p];
      const double inv = 1.0 / (std::sqrt(n2) + 1e-10);
      for (int c = 0; c < x.channels(); ++c) out.channel(c)[p] *= inv;
    }
    return out;
  }

  std::vector<Layer> layers_;
};

/// Mean over layers of the per-pixel squared distance between unit-normalised
/// feature maps of the frozen extractor. Zero iff features coincide.
inline double perceptual_distance(const Image& a, const Image& b) {
  require_same_shape(a, b, "perceptual_distance");
  const auto& ex = PerceptualExtractor::instance();
  return PerceptualExtractor::distance(ex.features(a), ex.features(b));
}

}  // namespace freqdoor
