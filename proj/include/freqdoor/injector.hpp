#pragma once

// Selective frequency-injection network.
//
// Two weight-shared encoder branches (benign image, trigger image). Each
// encoder stage splits its features into low/high bands with an
// input-conditioned per-channel filter (decoupler), fuses the trigger bands
// into the benign bands through squeeze-excite gates, reweights the bands per
// channel (modulator) and applies a residual convolution. The trigger branch
// keeps its own modulated features. A U-Net decoder with skips from the fused
// benign stages produces a raw residual that is bounded by epsilon * tanh.
// A separate residual decoder recovers the trigger from I_p - I.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "freqdoor/image.hpp"
#include "freqdoor/nn.hpp"

namespace freqdoor {

struct InjectorConfig {
  int channels = 3;
  int base_width = 16;
  int stages = 3;
  int residual_decoder_width = 16;
  double epsilon = 8.0 / 255.0;
  /// Zero the final decoder layer so the initial residual is exactly zero.
  bool zero_output = false;
  std::uint64_t seed = 0;

  void validate() const {
    require(channels == 1 || channels == 3, "injector channels must be 1 or 3");
    require(base_width >= 4 && stages >= 1 && stages <= 4, "injector width/stages out of range");
    require(residual_decoder_width >= 1, "residual decoder width must be positive");
    require(epsilon > 0.0 && epsilon <= 0.1, "epsilon must be in (0, 0.1]");
  }
};

/// Low/high feature bands. Stored in double so that low + high reproduces
/// float features exactly (exact while the exponent gap between a feature and
/// its low band stays within 29 bits).
struct FeatureBands {
  Tensor<double> low;
  Tensor<double> high;
};

/// Head producing the decoupler's per-channel 3x3 kernels from pooled
/// features: kernels = softmax_9(W * gap(x) + b).
template <class T>
struct DecouplerWeights {
  Tensor<T> weight;  ///< (C*9, C, 1)
  Tensor<T> bias;    ///< (C*9, 1, 1)
};

/// Squeeze-excite gate weights.
template <class T>
struct GateWeights {
  Tensor<T> fc1_w, fc1_b, fc2_w, fc2_b;
};

template <class T>
class Injector {
 public:
  using Graph = ag::Graph<T>;
  using Var = ag::Var;

  explicit Injector(InjectorConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    build(params_, rng);
  }

  /// Adopts externally supplied parameters (e.g. from a checkpoint); names and
  /// shapes must match the architecture implied by cfg.
  Injector(InjectorConfig cfg, ParamSet<T> params) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(0);
    build(params_, rng);
    require(params.count() == params_.count(), "injector parameter count mismatch");
    for (std::size_t i = 0; i < params.count(); ++i) {
      require(params.name(i) == params_.name(i) && params[i].shape() == params_[i].shape(),
              "injector parameter layout mismatch at " + params.name(i));
    }
    params_ = std::move(params);
  }

  const InjectorConfig& config() const { return cfg_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }
  std::size_t parameter_count() const { return params_.scalar_count(); }
  T epsilon() const { return T(cfg_.epsilon); }

  /// Poisoned image I_p = clamp(I + eps * tanh(raw), 0, 1).
  Var poison(Graph& g, Var benign, Var trigger) const {
    const Var raw = raw_residual(g, benign, trigger);
    const Var bounded = g.scale(g.tanh(raw), epsilon());
    return g.clamp(g.add(benign, bounded), T(0), T(1));
  }

  /// Unbounded decoder output of the injection network.
  Var raw_residual(Graph& g, Var benign, Var trigger) const {
    Var t = g.relu(in_conv_(g, params_, trigger));
    return residual_core(g, benign, [&](int s) {
      const auto& st = stages_[s];
      if (s > 0) t = g.relu(st.down(g, params_, t));
      const auto bands = decouple_vars(g, st, t);
      if (s + 1 < cfg_.stages) t = g.add(t, st.body(g, params_, g.relu(modulate(g, st, bands.first, bands.second))));
      return bands;
    });
  }

  /// Trigger-branch bands per stage. They do not depend on the benign image,
  /// so one encoding serves every injection of the same trigger.
  struct TriggerCode {
    std::vector<std::pair<Tensor<T>, Tensor<T>>> bands;
  };

  TriggerCode encode_trigger(const Image& trigger) const {
    require(trigger.channels() == cfg_.channels, "encode_trigger: channel count differs from injector");
    Graph g(false);
    std::vector<std::pair<Var, Var>> vars;
    Var t = g.relu(in_conv_(g, params_, g.constant(trigger.as<T>())));
    for (int s = 0; s < cfg_.stages; ++s) {
      const auto& st = stages_[s];
      if (s > 0) t = g.relu(st.down(g, params_, t));
      vars.push_back(decouple_vars(g, st, t));
      if (s + 1 < cfg_.stages) t = g.add(t, st.body(g, params_, g.relu(modulate(g, st, vars.back().first, vars.back().second))));
    }
    TriggerCode code;
    for (const auto& [l, h] : vars) code.bands.emplace_back(g.value(l), g.value(h));
    return code;
  }

  /// Residual decoder on a signed residual (I_p - I); unclamped output.
  Var recover_raw(Graph& g, Var residual) const {
    const auto& ps = params_;
    Var x = g.scale(residual, T(1) / epsilon());
    x = g.relu(rd_[0](g, ps, x));
    x = g.relu(rd_[1](g, ps, x));
    x = g.relu(rd_[2](g, ps, x));
    return rd_[3](g, ps, x);
  }

  /// I_p in double: the network runs in T, the bounded residual is added to
  /// the double benign image, so a zero residual reproduces it exactly.
  Image inject(const Image& benign, const Image& trigger) const {
    require_same_shape(benign, trigger, "inject");
    require(benign.channels() == cfg_.channels, "inject: channel count differs from injector");
    Graph g(false);
    return bound(benign, g.value(raw_residual(g, g.constant(benign.as<T>()), g.constant(trigger.as<T>()))));
  }

  /// Same result as inject(benign, trigger) for the trigger that was encoded.
  Image inject(const Image& benign, const TriggerCode& code) const {
    require(benign.channels() == cfg_.channels, "inject: channel count differs from injector");
    require(code.bands.size() == std::size_t(cfg_.stages), "inject: trigger code has the wrong stage count");
    Graph g(false);
    const Var raw = residual_core(g, g.constant(benign.as<T>()), [&](int s) {
      const auto& [l, h] = code.bands[std::size_t(s)];
      return std::pair<Var, Var>{g.constant(l), g.constant(h)};
    });
    return bound(benign, g.value(raw));
  }

  /// Decoder output clamped to [0,1].
  Image recover_trigger(const Image& residual) const {
    require(residual.channels() == cfg_.channels, "recover_trigger: channel count differs from injector");
    Graph g(false);
    const Var out = recover_raw(g, g.constant(residual.as<T>()));
    Image img = Image::from(g.value(out));
    img.clamp01();
    return img;
  }

  DecouplerWeights<T> decoupler_weights(int stage) const {
    const auto& st = stages_.at(std::size_t(stage));
    return {params_[st.filter_head.w], params_[st.filter_head.b]};
  }

  GateWeights<T> gate_weights(int stage, bool low_band) const {
    const auto& se = low_band ? stages_.at(std::size_t(stage)).fuse_low : stages_.at(std::size_t(stage)).fuse_high;
    return {params_[se.fc1.w], params_[se.fc1.b], params_[se.fc2.w], params_[se.fc2.b]};
  }

  /// Names of the residual decoder parameters (eta).
  std::vector<std::size_t> residual_decoder_params() const {
    std::vector<std::size_t> out;
    for (const auto& c : rd_) {
      out.push_back(c.w);
      out.push_back(c.b);
    }
    return out;
  }

  /// Decoupler as a graph op: (low, high) with high = x - low.
  std::pair<Var, Var> decouple_vars(Graph& g, int stage, Var x) const { return decouple_vars(g, stages_[stage], x); }

 private:
  /// Shared body of raw_residual; `trigger_bands(s)` yields the trigger's
  /// (low, high) bands at stage s and is called once per stage in order.
  template <class Bands>
  Var residual_core(Graph& g, Var benign, Bands&& trigger_bands) const {
    const auto& ps = params_;
    Var b = g.relu(in_conv_(g, ps, benign));
    std::vector<Var> skips;
    for (int s = 0; s < cfg_.stages; ++s) {
      const auto& st = stages_[s];
      if (s > 0) b = g.relu(st.down(g, ps, b));
      auto [bl, bh] = decouple_vars(g, st, b);
      auto [tl, th] = trigger_bands(s);
      const Var fl = fuse_vars(g, st.fuse_low, bl, tl);
      const Var fh = fuse_vars(g, st.fuse_high, bh, th);
      b = g.add(b, st.body(g, ps, g.relu(modulate(g, st, fl, fh))));
      skips.push_back(b);
    }
    Var d = skips.back();
    for (int s = cfg_.stages - 1; s >= 1; --s) {
      const auto& ref = g.shape(skips[s - 1]);
      d = g.add(g.upsample_to(reduce_[s - 1](g, ps, d), ref.h, ref.w), skips[s - 1]);
      d = g.relu(dec_conv_[s - 1](g, ps, d));
    }
    return out_conv_(g, ps, d);
  }

  Image bound(const Image& benign, const Tensor<T>& rv) const {
    const double eps = cfg_.epsilon;
    Image img(benign.height(), benign.width(), benign.channels());
    for (std::size_t i = 0; i < img.size(); ++i) {
      double v = std::clamp(benign[i] + eps * std::tanh(double(rv[i])), 0.0, 1.0);
      // Rounding of benign + eps can overshoot the budget by one ulp.
      while (v - benign[i] > eps) v = std::nextafter(v, benign[i]);
      while (benign[i] - v > eps) v = std::nextafter(v, benign[i]);
      img[i] = v;
    }
    return img;
  }

  struct Stage {
    int width = 0;
    nn::Conv down;
    nn::Conv filter_head;
    std::size_t mod_low = 0;
    std::size_t mod_high = 0;
    nn::Conv body;
    nn::SqueezeExcite fuse_low;
    nn::SqueezeExcite fuse_high;
  };

  void build(ParamSet<T>& ps, Rng& rng) {
    const int w0 = cfg_.base_width;
    in_conv_ = nn::Conv::make(ps, "enc.in", cfg_.channels, w0, 3, 1, rng);
    stages_.clear();
    reduce_.clear();
    dec_conv_.clear();
    for (int s = 0; s < cfg_.stages; ++s) {
      Stage st;
      st.width = w0 << s;
      const std::string p = "enc.s" + std::to_string(s);
      if (s > 0) st.down = nn::Conv::make(ps, p + ".down", st.width / 2, st.width, 3, 2, rng);
      st.filter_head = nn::Conv::make(ps, p + ".decoupler", st.width, st.width * 9, 1, 1, rng, 0.0);
      st.mod_low = ps.add(p + ".modulator.low", Shape{st.width, 1, 1});
      st.mod_high = ps.add(p + ".modulator.high", Shape{st.width, 1, 1});
      ps[st.mod_low].fill(T(1));
      ps[st.mod_high].fill(T(1));
      st.body = nn::Conv::make(ps, p + ".body", st.width, st.width, 3, 1, rng, 0.5);
      st.fuse_low = nn::SqueezeExcite::make(ps, p + ".fuse.low", st.width, rng);
      st.fuse_high = nn::SqueezeExcite::make(ps, p + ".fuse.high", st.width, rng);
      stages_.push_back(st);
    }
    for (int s = cfg_.stages - 1; s >= 1; --s) {
      const int wi = w0 << s, wo = w0 << (s - 1);
      reduce_.insert(reduce_.begin(), nn::Conv::make(ps, "dec.s" + std::to_string(s - 1) + ".reduce", wi, wo, 1, 1, rng));
      dec_conv_.insert(dec_conv_.begin(), nn::Conv::make(ps, "dec.s" + std::to_string(s - 1) + ".conv", wo, wo, 3, 1, rng));
    }
    out_conv_ = nn::Conv::make(ps, "dec.out", w0, cfg_.channels, 3, 1, rng, cfg_.zero_output ? 0.0 : 0.1);
    const int rw = cfg_.residual_decoder_width;
    rd_ = {nn::Conv::make(ps, "rdec.c0", cfg_.channels, rw, 3, 1, rng),
           nn::Conv::make(ps, "rdec.c1", rw, rw, 3, 1, rng),
           nn::Conv::make(ps, "rdec.c2", rw, rw, 3, 1, rng),
           nn::Conv::make(ps, "rdec.out", rw, cfg_.channels, 3, 1, rng)};
    ps[rd_[3].b].fill(T(0.5));
  }

  std::pair<Var, Var> decouple_vars(Graph& g, const Stage& st, Var x) const {
    const Var kernels = g.softmax_groups(st.filter_head(g, params_, g.gap(x)), 9);
    const Var low = g.depthwise(x, kernels);
    return {low, g.sub(x, low)};
  }

  Var fuse_vars(Graph& g, const nn::SqueezeExcite& se, Var benign_band, Var trigger_band) const {
    return g.add(g.channel_mul(trigger_band, se(g, params_, benign_band)), benign_band);
  }

  Var modulate(Graph& g, const Stage& st, Var low, Var high) const {
    return g.add(g.channel_mul(low, g.param(params_, st.mod_low)), g.channel_mul(high, g.param(params_, st.mod_high)));
  }

  InjectorConfig cfg_;
  ParamSet<T> params_;
  nn::Conv in_conv_;
  std::vector<Stage> stages_;
  std::vector<nn::Conv> reduce_;
  std::vector<nn::Conv> dec_conv_;
  nn::Conv out_conv_;
  std::vector<nn::Conv> rd_;
};

/// Parameter count of the full-width reference backbone (base width 32,
/// residual decoder width 32, 3 channels, 3 stages). Frozen; a unit test
/// recomputes it from the architecture.
inline constexpr std::size_t kReferenceInjectorParams = 582710;

inline InjectorConfig reference_injector_config() {
  InjectorConfig c;
  c.base_width = 32;
  c.residual_decoder_width = 32;
  return c;
}

/// Splits features into (low, high) with the given decoupler head. The low
/// band is a per-channel 3x3 filtering whose taps are softmax-normalised
/// (sum to 1) with replicate borders; high = features - low.
template <class T>
FeatureBands decouple(const Tensor<T>& features, const DecouplerWeights<T>& w) {
  if (!features.all_finite()) throw NumericError("decouple: non-finite features");
  ag::Graph<double> g(false);
  const auto f = g.constant(features.template cast<double>());
  const auto k = g.softmax_groups(
      g.conv2d(g.gap(f), g.constant(w.weight.template cast<double>()), g.constant(w.bias.template cast<double>()), 1, 0), 9);
  const auto low = g.depthwise(f, k);
  // low is rounded to T so that high = f - low is exact in double and
  // low + high reproduces f bit for bit.
  FeatureBands bands{g.value(low).template cast<T>().template cast<double>(), Tensor<double>(features.shape())};
  for (std::size_t i = 0; i < features.size(); ++i) bands.high[i] = double(features[i]) - bands.low[i];
  return bands;
}

/// Squeeze-excite activations S(x) in (0,1), one per channel.
template <class T>
Tensor<T> gate_activations(const Tensor<T>& band, const GateWeights<T>& w) {
  ag::Graph<T> g(false);
  const auto x = g.constant(band);
  const auto h = g.relu(g.conv2d(g.gap(x), g.constant(w.fc1_w), g.constant(w.fc1_b), 1, 0));
  return g.value(g.sigmoid(g.conv2d(h, g.constant(w.fc2_w), g.constant(w.fc2_b), 1, 0)));
}

/// trigger_band * gate + benign_band with one gate value per channel.
template <class T>
Tensor<T> fuse_with_gate(const Tensor<T>& benign_band, const Tensor<T>& trigger_band, const Tensor<T>& gate) {
  require(benign_band.shape() == trigger_band.shape(), "fuse_frequency: band shape mismatch");
  require(gate.size() == std::size_t(benign_band.channels()), "fuse_frequency: gate length mismatch");
  Tensor<T> out(benign_band.shape());
  const std::size_t plane = benign_band.shape().plane();
  for (int c = 0; c < benign_band.channels(); ++c)
    for (std::size_t i = 0; i < plane; ++i)
      out.channel(c)[i] = trigger_band.channel(c)[i] * gate[c] + benign_band.channel(c)[i];
  return out;
}

/// Frequency fusion: trigger_band (x) S(benign_band) + benign_band.
template <class T>
Tensor<T> fuse_frequency(const Tensor<T>& benign_band, const Tensor<T>& trigger_band, const GateWeights<T>& w) {
  require(benign_band.shape() == trigger_band.shape(), "fuse_frequency: band shape mismatch");
  return fuse_with_gate(benign_band, trigger_band, gate_activations(benign_band, w));
}

}  // namespace freqdoor
