#pragma once

// Fine-pruning, STRIP-style entropy and gradient saliency for the victim.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "freqdoor/evaluation.hpp"

namespace freqdoor {

struct ChannelRef {
  std::size_t layer = 0;  ///< index into RestorationModel::prunable_layers()
  int channel = 0;
  double activation = 0;  ///< mean |activation| over the calibration set
};

/// Mean absolute activation of every prunable channel, layer-major order.
inline std::vector<ChannelRef> channel_activations(const RestorationModel<float>& model,
                                                   const std::vector<Image>& calib, int workers = 1) {
  require(!calib.empty(), "fine_prune: empty calibration set");
  const auto& layers = RestorationModel<float>::prunable_layers();
  std::vector<std::vector<std::vector<double>>> per(calib.size());
  nn::parallel_for(calib.size(), workers, [&](std::size_t i) {
    ag::Graph<float> g(false);
    std::vector<ag::Var> taps;
    model.forward(g, g.constant(calib[i].as<float>()), &taps);
    per[i].resize(taps.size());
    for (std::size_t l = 0; l < taps.size(); ++l) {
      const auto& v = g.value(taps[l]);
      const std::size_t plane = v.shape().plane();
      per[i][l].resize(std::size_t(v.channels()));
      for (int c = 0; c < v.channels(); ++c) {
        double s = 0;
        for (std::size_t p = 0; p < plane; ++p) s += std::abs(double(v.channel(c)[p]));
        per[i][l][std::size_t(c)] = s / double(plane);
      }
    }
  });
  std::vector<ChannelRef> out;
  for (std::size_t l = 0; l < layers.size(); ++l)
    for (std::size_t c = 0; c < per[0][l].size(); ++c) {
      double s = 0;
      for (std::size_t i = 0; i < calib.size(); ++i) s += per[i][l][c];
      out.push_back({l, int(c), s / double(calib.size())});
    }
  return out;
}

/// Channels sorted by ascending activation (stable, so ties keep layer-major
/// order). Pruning ratio r removes the first round(r * N).
inline std::vector<ChannelRef> prune_ranking(std::vector<ChannelRef> acts) {
  std::stable_sort(acts.begin(), acts.end(),
                   [](const ChannelRef& a, const ChannelRef& b) { return a.activation < b.activation; });
  return acts;
}

inline std::size_t pruned_count(std::size_t total, double ratio) {
  require(ratio >= 0.0 && ratio <= 1.0, "prune ratio must be in [0,1]");
  return std::min(total, std::size_t(std::llround(ratio * double(total))));
}

/// Copy of `model` with the first pruned_count(ratio) ranked channels zeroed
/// (weight rows and biases).
inline RestorationModel<float> prune_ranked(const RestorationModel<float>& model,
                                            const std::vector<ChannelRef>& ranking, double ratio) {
  RestorationModel<float> out = model;
  const std::size_t k = pruned_count(ranking.size(), ratio);
  const auto& layers = RestorationModel<float>::prunable_layers();
  for (std::size_t i = 0; i < k; ++i) {
    const auto& conv = out.layer(layers[ranking[i].layer]);
    auto& w = out.params()[conv.w];
    const std::size_t row = std::size_t(w.height()) * std::size_t(w.width());
    std::fill_n(w.data() + std::size_t(ranking[i].channel) * row, row, 0.0f);
    out.params()[conv.b][std::size_t(ranking[i].channel)] = 0.0f;
  }
  return out;
}

inline RestorationModel<float> fine_prune(const RestorationModel<float>& model, const std::vector<Image>& calib,
                                          double ratio, int workers = 1) {
  require(ratio >= 0.0 && ratio <= 1.0, "prune ratio must be in [0,1]");
  return prune_ranked(model, prune_ranking(channel_activations(model, calib, workers)), ratio);
}

struct PruneSchedule {
  std::vector<double> ratios{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<std::string> layers = RestorationModel<float>::prunable_layers();

  void validate() const {
    require(!ratios.empty(), "prune schedule is empty");
    for (std::size_t i = 0; i < ratios.size(); ++i) {
      require(ratios[i] >= 0.0 && ratios[i] <= 1.0, "prune ratios must be in [0,1]");
      require(i == 0 || ratios[i] > ratios[i - 1], "prune ratios must be strictly increasing");
    }
    require(layers == RestorationModel<float>::prunable_layers(), "prunable layer list differs from the model's");
  }
};

struct PrunePoint {
  double ratio = 0;
  std::size_t pruned = 0;
  double ba = 0;
  double asr = 0;
};

/// BA/ASR of the pruned victim at each ratio. References stay fixed (clean
/// baseline); `poisoned` are the attacked test inputs.
inline std::vector<PrunePoint> prune_sweep(const RestorationModel<float>& victim, const std::vector<Image>& calib,
                                           const PruneSchedule& schedule, const std::vector<Image>& benign,
                                           const std::vector<Image>& poisoned,
                                           const std::vector<ClassificationRefs>& refs, int workers = 1) {
  schedule.validate();
  const auto ranking = prune_ranking(channel_activations(victim, calib, workers));
  std::vector<PrunePoint> out;
  for (double r : schedule.ratios) {
    const auto m = prune_ranked(victim, ranking, r);
    out.push_back({r, pruned_count(ranking.size(), r), benign_accuracy(m, benign, refs, workers),
                   attack_success_rate(m, poisoned, refs, workers)});
  }
  return out;
}

struct StripConfig {
  int overlays = 10;
  double blend = 0.5;
  int bins = 256;
  std::uint64_t seed = 0;

  void validate() const {
    require(overlays >= 1, "strip: overlay count must be >= 1");
    require(blend > 0.0 && blend < 1.0, "strip: blend must be in (0,1)");
    require(bins >= 2, "strip: bins must be >= 2");
  }
};

/// Shannon entropy (bits) of a histogram of values over `bins` uniform bins
/// on [-1, 1]; out-of-range values fall into the end bins.
inline double histogram_entropy(const std::vector<double>& values, int bins) {
  require(bins >= 2, "histogram needs >= 2 bins");
  if (values.empty()) return 0.0;
  std::vector<std::size_t> h(std::size_t(bins), 0);
  for (double v : values) {
    const double t = (v + 1.0) / 2.0 * bins;
    const long b = std::clamp<long>(long(std::floor(t)), 0, bins - 1);
    ++h[std::size_t(b)];
  }
  double e = 0;
  for (auto c : h) {
    if (!c) continue;
    const double p = double(c) / double(values.size());
    e -= p * std::log2(p);
  }
  return e;
}

/// Blends the input with N distinct pool images drawn by cfg.seed, restores
/// each blend and returns the entropy of the pooled residual histogram.
template <class Model>
double strip_entropy(const Model& model, const Image& input, const std::vector<Image>& clean_pool,
                     const StripConfig& cfg) {
  cfg.validate();
  require(clean_pool.size() >= std::size_t(cfg.overlays), "strip: clean pool smaller than overlay count");
  std::vector<std::size_t> idx(clean_pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(cfg.seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<double> residuals;
  residuals.reserve(input.size() * std::size_t(cfg.overlays));
  for (int i = 0; i < cfg.overlays; ++i) {
    const Image& c = clean_pool[idx[std::size_t(i)]];
    require_same_shape(input, c, "strip_entropy");
    Image blend(input.height(), input.width(), input.channels());
    // Blend is held at the model's precision so that an identity model gives
    // exactly zero residuals.
    using S = typename Model::Scalar;
    for (std::size_t p = 0; p < blend.size(); ++p)
      blend[p] = double(S(cfg.blend * input[p] + (1.0 - cfg.blend) * c[p]));
    const Image out = model.restore(blend);
    for (std::size_t p = 0; p < blend.size(); ++p) residuals.push_back(out[p] - blend[p]);
  }
  return histogram_entropy(residuals, cfg.bins);
}

/// Overlapping coefficient sum_i min(p_i, q_i) of two samples, histogrammed on
/// `bins` equal bins spanning their joint range. 1 when both are identical
/// point masses.
inline double overlap_coefficient(const std::vector<double>& a, const std::vector<double>& b, int bins = 32) {
  require(!a.empty() && !b.empty(), "overlap: empty sample");
  double lo = a[0], hi = a[0];
  for (const auto* v : {&a, &b})
    for (double x : *v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  if (hi == lo) return 1.0;
  auto hist = [&](const std::vector<double>& v) {
    std::vector<double> h(std::size_t(bins), 0.0);
    for (double x : v) {
      const long k = std::clamp<long>(long((x - lo) / (hi - lo) * bins), 0, bins - 1);
      h[std::size_t(k)] += 1.0 / double(v.size());
    }
    return h;
  };
  const auto ha = hist(a), hb = hist(b);
  double s = 0;
  for (int i = 0; i < bins; ++i) s += std::min(ha[std::size_t(i)], hb[std::size_t(i)]);
  return s;
}

/// d ||F(x)||_2 / dx.
template <class T>
Tensor<T> output_norm_gradient(const RestorationModel<T>& model, const Image& input) {
  ag::Graph<T> g(true);
  const auto x = g.input(input.as<T>());
  const auto n = g.l2norm(model.forward(g, x));
  g.backward(n);
  return g.grad(x);
}

/// Channel-max |gradient|, Gaussian-smoothed (sigma 2), min-max normalised.
/// Flat maps (including an all-zero gradient) give all zeros.
template <class T>
Image saliency_map(const RestorationModel<T>& model, const Image& input) {
  const auto grad = output_norm_gradient(model, input);
  Image m(input.height(), input.width(), 1);
  const std::size_t plane = grad.shape().plane();
  for (std::size_t p = 0; p < plane; ++p) {
    double v = 0;
    for (int c = 0; c < grad.channels(); ++c) v = std::max(v, std::abs(double(grad.channel(c)[p])));
    m[p] = v;
  }
  m = gaussian_blur(m, 2.0);
  double lo = m[0], hi = m[0];
  for (std::size_t p = 0; p < plane; ++p) {
    lo = std::min(lo, m[p]);
    hi = std::max(hi, m[p]);
  }
  if (!(hi > lo)) return Image(input.height(), input.width(), 1, 0.0);
  for (std::size_t p = 0; p < plane; ++p) m[p] = (m[p] - lo) / (hi - lo);
  return m;
}

}  // namespace freqdoor
