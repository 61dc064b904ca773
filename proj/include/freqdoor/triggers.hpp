#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "freqdoor/image.hpp"

namespace freqdoor {

namespace detail {
inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

/// Fractal value noise in [0,1]: `octaves` lattice layers, cell size halving
/// per octave, smoothstep interpolation.
inline std::vector<double> value_noise(int h, int w, double cell, int octaves, Rng& rng) {
  std::vector<double> out(std::size_t(h) * w, 0.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double amp = 1.0, total = 0.0;
  for (int o = 0; o < octaves; ++o) {
    const int gh = int(std::ceil(h / cell)) + 2, gw = int(std::ceil(w / cell)) + 2;
    std::vector<double> lat(std::size_t(gh) * gw);
    for (auto& v : lat) v = u(rng);
    const double ox = u(rng) * cell, oy = u(rng) * cell;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double fy = (y + oy) / cell, fx = (x + ox) / cell;
        const int iy = int(fy), ix = int(fx);
        const double ty = smoothstep(fy - iy), tx = smoothstep(fx - ix);
        const double a = lat[std::size_t(iy) * gw + ix], b = lat[std::size_t(iy) * gw + ix + 1];
        const double c = lat[std::size_t(iy + 1) * gw + ix], d = lat[std::size_t(iy + 1) * gw + ix + 1];
        out[std::size_t(y) * w + x] += amp * ((a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty);
      }
    total += amp;
    amp *= 0.5;
    cell = std::max(1.0, cell / 2.0);
  }
  for (auto& v : out) v /= total;
  return out;
}

inline std::array<double, 3> random_color(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {u(rng), u(rng), u(rng)};
}
}  // namespace detail

/// Seeded procedural texture: colour gradient blended with fractal noise.
inline Image procedural_texture(int h, int w, int channels, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto c0 = detail::random_color(rng), c1 = detail::random_color(rng), c2 = detail::random_color(rng);
  const double theta = u(rng) * 2.0 * M_PI;
  const double cell = 4.0 + 12.0 * u(rng);
  const auto noise = detail::value_noise(h, w, cell, 4, rng);
  const double dy = std::sin(theta), dx = std::cos(theta);
  const double span = std::abs(dy) * (h - 1) + std::abs(dx) * (w - 1) + 1e-9;
  const double base = std::min(0.0, dy * (h - 1)) + std::min(0.0, dx * (w - 1));
  Image img(h, w, channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double g = (dy * y + dx * x - base) / span;
      const double n = noise[std::size_t(y) * w + x];
      for (int c = 0; c < channels; ++c) {
        const double grad = c0[c] * (1 - g) + c1[c] * g;
        img.at(y, x, c) = std::clamp(0.45 * grad + 0.55 * (n * c2[c] + (1 - n) * (1 - c2[c])), 0.0, 1.0);
      }
    }
  return img;
}

/// Seeded geometric emblem: concentric rings, diagonal stripes and a solid
/// disc on a two-tone background.
inline Image emblem(int h, int w, int channels, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto bg0 = detail::random_color(rng), bg1 = detail::random_color(rng);
  const auto ring = detail::random_color(rng), disc = detail::random_color(rng);
  const double cy = h * (0.3 + 0.4 * u(rng)), cx = w * (0.3 + 0.4 * u(rng));
  const double ring_period = 4.0 + 6.0 * u(rng);
  const double stripe_period = 6.0 + 10.0 * u(rng);
  const double disc_r = std::min(h, w) * (0.08 + 0.1 * u(rng));
  const double dy = h * (0.2 + 0.6 * u(rng)), dx = w * (0.2 + 0.6 * u(rng));
  Image img(h, w, channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double r = std::hypot(y - cy, x - cx);
      const double rings = 0.5 + 0.5 * std::cos(2 * M_PI * r / ring_period);
      const double stripes = std::fmod(double(x + y), stripe_period) < stripe_period / 2 ? 1.0 : 0.0;
      const bool in_disc = std::hypot(y - dy, x - dx) < disc_r;
      for (int c = 0; c < channels; ++c) {
        double v = stripes * bg0[c] + (1 - stripes) * bg1[c];
        v = 0.5 * v + 0.5 * rings * ring[c];
        if (in_disc) v = disc[c];
        img.at(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  return img;
}

/// The authentic trigger plus the pool of pseudo triggers used during robust
/// victim training.
struct TriggerSet {
  Image authentic;
  std::vector<Image> pseudo_pool;
  std::uint64_t sampling_seed = 0;

  void validate() const {
    authentic.validate("authentic trigger");
    require(!pseudo_pool.empty(), "pseudo trigger pool is empty");
    for (const auto& p : pseudo_pool) {
      require(p.same_shape(authentic), "pseudo trigger shape differs from authentic trigger");
      require(max_abs_diff(p, authentic) > 0.05, "pseudo trigger too close to the authentic trigger");
    }
  }
};

/// Authentic emblem trigger and `pool_size` procedural pseudo triggers, all
/// derived from one seed. Stream 0 is the authentic trigger, 1000+j pool
/// member j.
inline TriggerSet make_trigger_set(int h, int w, int channels, std::uint64_t seed, int pool_size = 16) {
  TriggerSet ts;
  ts.authentic = quantize8(emblem(h, w, channels, derive_seed(seed, 0)));
  for (int j = 0; j < pool_size; ++j)
    ts.pseudo_pool.push_back(quantize8(procedural_texture(h, w, channels, derive_seed(seed, 1000 + j))));
  ts.sampling_seed = derive_seed(seed, 1);
  ts.validate();
  return ts;
}

/// Trigger corpus for injector training: the authentic trigger, then an even
/// mix of emblems and textures from streams disjoint from the pseudo pool.
inline std::vector<Image> make_trigger_corpus(const TriggerSet& ts, int count, std::uint64_t seed) {
  const int h = ts.authentic.height(), w = ts.authentic.width(), c = ts.authentic.channels();
  std::vector<Image> out{ts.authentic};
  for (int i = 0; i < count; ++i) {
    const auto s = derive_seed(seed, 5000 + std::uint64_t(i));
    out.push_back(quantize8(i % 2 == 0 ? emblem(h, w, c, s) : procedural_texture(h, w, c, s)));
  }
  return out;
}

}  // namespace freqdoor
