#pragma once

// Toy victim restorer and its clean / two-term / robust backdoor training.

#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "freqdoor/baselines.hpp"
#include "freqdoor/injector.hpp"
#include "freqdoor/triggers.hpp"

namespace freqdoor {

struct RestorationConfig {
  int channels = 3;
  int base_width = 16;
  /// Add the input to the head output (global skip).
  bool residual = true;
  std::uint64_t seed = 0;

  void validate() const {
    require(channels == 1 || channels == 3, "restoration channels must be 1 or 3");
    require(base_width >= 2, "restoration base width must be >= 2");
  }
};

/// Three-stage encoder-decoder with additive skips:
///   e1 = relu(conv(x)), e2 = relu(conv_s2(e1)), e3 = relu(conv_s2(e2))
///   bott = relu(conv(e3))
///   d2 = relu(conv(up(red3(bott)) + e2)), d1 = relu(conv(up(red2(d2)) + e1))
///   out = clamp(head(d1) [+ x], 0, 1)
template <class T>
class RestorationModel {
 public:
  using Scalar = T;
  using Graph = ag::Graph<T>;
  using Var = ag::Var;

  /// Prunable (decoder-side, non-head) layers in tap order.
  static const std::vector<std::string>& prunable_layers() {
    static const std::vector<std::string> names{"dec.bott", "dec.red3", "dec.d2", "dec.red2", "dec.d1"};
    return names;
  }

  explicit RestorationModel(RestorationConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    build(params_, rng);
  }

  RestorationModel(RestorationConfig cfg, ParamSet<T> params) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(0);
    build(params_, rng);
    require(params.count() == params_.count(), "restoration parameter count mismatch");
    for (std::size_t i = 0; i < params.count(); ++i)
      require(params.name(i) == params_.name(i) && params[i].shape() == params_[i].shape(),
              "restoration parameter layout mismatch at " + params.name(i));
    params_ = std::move(params);
  }

  const RestorationConfig& config() const { return cfg_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }

  /// Clamped output. When `taps` is given, the outputs of the prunable layers
  /// are appended in prunable_layers() order.
  Var forward(Graph& g, Var x, std::vector<Var>* taps = nullptr) const {
    const auto& ps = params_;
    auto tap = [&](Var v) {
      if (taps) taps->push_back(v);
      return v;
    };
    const Var e1 = g.relu(e1_(g, ps, x));
    const Var e2 = g.relu(e2_(g, ps, e1));
    const Var e3 = g.relu(e3_(g, ps, e2));
    const Var bott = tap(g.relu(bott_(g, ps, e3)));
    const Var r3 = tap(red3_(g, ps, bott));
    const Var d2 = tap(g.relu(d2_(g, ps, g.add(g.upsample_to(r3, g.shape(e2).h, g.shape(e2).w), e2))));
    const Var r2 = tap(red2_(g, ps, d2));
    const Var d1 = tap(g.relu(d1_(g, ps, g.add(g.upsample_to(r2, g.shape(e1).h, g.shape(e1).w), e1))));
    Var y = head_(g, ps, d1);
    if (cfg_.residual) y = g.add(y, x);
    return g.clamp(y, T(0), T(1));
  }

  Image restore(const Image& img) const {
    require(img.channels() == cfg_.channels, "restore: channel count differs from model");
    require(img.height() >= 4 && img.width() >= 4, "restore: image too small");
    Graph g(false);
    return Image::from(g.value(forward(g, g.constant(img.as<T>()))));
  }

  /// Conv handle of a prunable layer by name.
  const nn::Conv& layer(const std::string& name) const {
    const auto& n = prunable_layers();
    const nn::Conv* convs[] = {&bott_, &red3_, &d2_, &red2_, &d1_};
    for (std::size_t i = 0; i < n.size(); ++i)
      if (n[i] == name) return *convs[i];
    throw ParameterError("unknown layer: " + name);
  }

  const nn::Conv& head() const { return head_; }

 private:
  void build(ParamSet<T>& ps, Rng& rng) {
    const int c = cfg_.channels, w = cfg_.base_width;
    e1_ = nn::Conv::make(ps, "enc.e1", c, w, 3, 1, rng);
    e2_ = nn::Conv::make(ps, "enc.e2", w, 2 * w, 3, 2, rng);
    e3_ = nn::Conv::make(ps, "enc.e3", 2 * w, 4 * w, 3, 2, rng);
    bott_ = nn::Conv::make(ps, "dec.bott", 4 * w, 4 * w, 3, 1, rng);
    red3_ = nn::Conv::make(ps, "dec.red3", 4 * w, 2 * w, 1, 1, rng);
    d2_ = nn::Conv::make(ps, "dec.d2", 2 * w, 2 * w, 3, 1, rng);
    red2_ = nn::Conv::make(ps, "dec.red2", 2 * w, w, 1, 1, rng);
    d1_ = nn::Conv::make(ps, "dec.d1", w, w, 3, 1, rng);
    head_ = nn::Conv::make(ps, "dec.head", w, c, 3, 1, rng, 0.1);
  }

  RestorationConfig cfg_;
  ParamSet<T> params_;
  nn::Conv e1_, e2_, e3_, bott_, red3_, d2_, red2_, d1_, head_;
};

/// A poisoning procedure. Key 0 selects the authentic trigger; key j+1 the
/// j-th pseudo trigger.
struct Attack {
  std::string name;
  int pseudo_count = 0;
  std::function<Image(const Image& benign, int key)> poison;
};

inline Attack learned_attack(std::shared_ptr<const Injector<float>> inj, std::shared_ptr<const TriggerSet> ts) {
  require(inj && ts, "learned_attack: null injector or trigger set");
  auto codes = std::make_shared<std::vector<Injector<float>::TriggerCode>>();
  codes->push_back(inj->encode_trigger(ts->authentic));
  for (const auto& p : ts->pseudo_pool) codes->push_back(inj->encode_trigger(p));
  return {"learned", int(ts->pseudo_pool.size()), [inj, codes](const Image& b, int key) {
            require(key >= 0 && std::size_t(key) < codes->size(), "learned attack: trigger key out of range");
            return inj->inject(b, (*codes)[std::size_t(key)]);
          }};
}

inline Attack fiba_attack(std::shared_ptr<const TriggerSet> ts, double blend, FrequencyAnalysisConfig cfg) {
  require(ts != nullptr, "fiba_attack: null trigger set");
  return {"fiba", int(ts->pseudo_pool.size()), [ts, blend, cfg](const Image& b, int key) {
            return fiba_inject(b, key == 0 ? ts->authentic : ts->pseudo_pool.at(std::size_t(key - 1)), blend, cfg);
          }};
}

/// WaNet has no trigger image; key selects the field seed.
inline Attack wanet_attack(double strength, int grid, std::uint64_t seed, int pseudo_count) {
  return {"wanet", pseudo_count, [=](const Image& b, int key) {
            return wanet_inject(b, strength, grid, derive_seed(seed, std::uint64_t(key)));
          }};
}

enum class TrainMode { clean, two_term, robust };

inline const char* to_string(TrainMode m) {
  switch (m) {
    case TrainMode::clean: return "clean";
    case TrainMode::two_term: return "two_term";
    case TrainMode::robust: return "robust";
  }
  return "?";
}

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "clean") return TrainMode::clean;
  if (s == "two_term") return TrainMode::two_term;
  if (s == "robust") return TrainMode::robust;
  throw ParameterError("unknown training mode: " + s);
}

struct BackdoorTrainConfig {
  double lambda1 = 0.75;
  double lambda2 = 0.125;
  double legacy_lambda = 0.5;
  int epochs = 20;
  int batch_size = 8;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::robust;
  int workers = 1;

  void validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    require(unit(lambda1) && unit(lambda2) && unit(legacy_lambda), "loss weights must be in [0,1]");
    require(lambda1 + lambda2 <= 1.0, "lambda1 + lambda2 must be <= 1");
    require(epochs >= 0 && batch_size >= 1, "epochs must be >= 0 and batch size >= 1");
    require(learning_rate > 0.0, "learning rate must be positive");
  }
};

/// (I, I_gt, I_p, I'_p, I_0.1) for one training pair.
struct TrainingSample {
  Image input;
  Image gt;
  Image poisoned;
  Image pseudo;
  Image target;

  void validate() const {
    for (const Image* im : {&gt, &poisoned, &pseudo, &target})
      require(im->same_shape(input), "training sample images must share one shape");
  }
};

struct BackdoorLoss {
  double clean = 0;   ///< ||F(I) - I_gt||
  double poison = 0;  ///< ||F(I_p) - I_0.1||
  double pseudo = 0;  ///< ||F(I'_p) - I_gt||
  double total = 0;
};

/// Robust objective on already-restored outputs, mean absolute error.
inline BackdoorLoss backdoor_loss(const Image& out_clean, const Image& out_poison, const Image& out_pseudo,
                                  const TrainingSample& s, const BackdoorTrainConfig& cfg) {
  cfg.validate();
  require(cfg.mode == TrainMode::robust, "backdoor_loss requires robust mode");
  BackdoorLoss l{mean_abs_diff(out_clean, s.gt), mean_abs_diff(out_poison, s.target),
                 mean_abs_diff(out_pseudo, s.gt), 0.0};
  l.total = cfg.lambda1 * l.clean + cfg.lambda2 * l.poison + (1.0 - cfg.lambda1 - cfg.lambda2) * l.pseudo;
  return l;
}

/// lambda * ||F(I) - I_gt|| + (1 - lambda) * ||F(I_p) - I_0.1||.
inline BackdoorLoss two_term_loss(const Image& out_clean, const Image& out_poison, const TrainingSample& s,
                                  const BackdoorTrainConfig& cfg) {
  cfg.validate();
  require(cfg.mode == TrainMode::two_term, "two_term_loss requires two_term mode");
  BackdoorLoss l{mean_abs_diff(out_clean, s.gt), mean_abs_diff(out_poison, s.target), 0.0, 0.0};
  l.total = cfg.legacy_lambda * l.clean + (1.0 - cfg.legacy_lambda) * l.poison;
  return l;
}

struct PseudoPoison {
  Image image;
  std::size_t index = 0;  ///< pool member used
};

/// Draws I'_t uniformly from the pool and injects it.
inline PseudoPoison make_pseudo_poison(const Image& img, const TriggerSet& ts, const Injector<float>& inj, Rng& rng) {
  require(!ts.pseudo_pool.empty(), "make_pseudo_poison: empty pseudo pool");
  std::uniform_int_distribution<std::size_t> pick(0, ts.pseudo_pool.size() - 1);
  const std::size_t j = pick(rng);
  return {inj.inject(img, ts.pseudo_pool[j]), j};
}

/// Loss of one sample under cfg.mode built on a graph; gradients are
/// accumulated into `grads` when given. Views not used by the mode are
/// ignored (may be empty).
template <class T>
BackdoorLoss victim_sample_loss(const RestorationModel<T>& model, const Tensor<T>& input, const Tensor<T>& gt,
                                const Tensor<T>& poisoned, const Tensor<T>& pseudo, const Tensor<T>& target,
                                const BackdoorTrainConfig& cfg, GradSet<T>* grads = nullptr) {
  ag::Graph<T> g(grads != nullptr);
  BackdoorLoss l;
  std::vector<std::pair<ag::Var, T>> terms;
  const auto lc = g.l1(model.forward(g, g.constant(input)), gt);
  l.clean = double(g.scalar(lc));
  if (cfg.mode == TrainMode::clean) {
    terms.push_back({lc, T(1)});
  } else {
    const auto lp = g.l1(model.forward(g, g.constant(poisoned)), target);
    l.poison = double(g.scalar(lp));
    if (cfg.mode == TrainMode::two_term) {
      terms = {{lc, T(cfg.legacy_lambda)}, {lp, T(1.0 - cfg.legacy_lambda)}};
    } else {
      const auto lq = g.l1(model.forward(g, g.constant(pseudo)), gt);
      l.pseudo = double(g.scalar(lq));
      terms = {{lc, T(cfg.lambda1)}, {lp, T(cfg.lambda2)}, {lq, T(1.0 - cfg.lambda1 - cfg.lambda2)}};
    }
  }
  const auto total = g.weighted_sum(terms);
  // Reported total is recombined in double so it decomposes exactly.
  if (cfg.mode == TrainMode::clean) l.total = l.clean;
  else if (cfg.mode == TrainMode::two_term) l.total = cfg.legacy_lambda * l.clean + (1.0 - cfg.legacy_lambda) * l.poison;
  else l.total = cfg.lambda1 * l.clean + cfg.lambda2 * l.poison + (1.0 - cfg.lambda1 - cfg.lambda2) * l.pseudo;
  if (grads) {
    g.backward(total);
    g.add_param_grads(*grads);
  }
  return l;
}

struct VictimEpoch {
  int epoch = 0;
  BackdoorLoss mean;
};

struct VictimTrainResult {
  RestorationModel<float> model;
  std::vector<VictimEpoch> history;
  /// Pseudo pool index drawn for each (epoch, sample) in visiting order.
  std::vector<std::size_t> pseudo_draws;
};

/// Paired (degraded, ground-truth) training images.
struct PairedSet {
  std::vector<Image> lq;
  std::vector<Image> gt;

  std::size_t size() const { return lq.size(); }
};

/// Trains a fresh RestorationModel<float>. I_p and I_0.1 are computed once per
/// sample; I'_p is redrawn every epoch from a pseudo key stream that is
/// separate from the data-order stream, so clean mode never touches the
/// attack and its result does not depend on it.
inline VictimTrainResult train_victim(RestorationConfig arch, const Attack* attack, const PairedSet& data,
                                      const BackdoorTrainConfig& cfg) {
  cfg.validate();
  require(data.size() > 0 && data.lq.size() == data.gt.size(), "train_victim: empty or misaligned data");
  const bool needs_attack = cfg.mode != TrainMode::clean;
  require(!needs_attack || attack != nullptr, "train_victim: attack required outside clean mode");
  require(cfg.mode != TrainMode::robust || attack->pseudo_count > 0, "train_victim: robust mode needs pseudo triggers");
  arch.channels = data.lq.front().channels();

  VictimTrainResult res{RestorationModel<float>(arch), {}, {}};
  auto& model = res.model;
  Adam<float> opt(model.params(), {.lr = cfg.learning_rate});
  GradSet<float> grads(model.params());

  const std::size_t n = data.size();
  std::vector<Tensor<float>> lq(n), gt(n), pois(needs_attack ? n : 0), target(needs_attack ? n : 0);
  for (std::size_t i = 0; i < n; ++i) {
    lq[i] = data.lq[i].as<float>();
    gt[i] = data.gt[i].as<float>();
  }
  if (needs_attack) {
    nn::parallel_for(n, cfg.workers, [&](std::size_t i) {
      pois[i] = attack->poison(data.lq[i], 0).as<float>();
      target[i] = degradation_target(data.lq[i], 0.1).as<float>();
    });
  }

  Rng order_rng(derive_seed(cfg.seed, 21));
  Rng pseudo_rng(derive_seed(cfg.seed, 22));
  std::vector<std::size_t> order(n);
  std::size_t batch_index = 0;
  for (int e = 0; e < cfg.epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), order_rng);
    std::vector<int> keys(n, 0);
    if (cfg.mode == TrainMode::robust) {
      std::uniform_int_distribution<int> pick(1, attack->pseudo_count);
      for (std::size_t k = 0; k < n; ++k) {
        keys[k] = pick(pseudo_rng);
        res.pseudo_draws.push_back(std::size_t(keys[k] - 1));
      }
    }
    BackdoorLoss sum;
    for (std::size_t s = 0; s < n; s += std::size_t(cfg.batch_size)) {
      const std::size_t end = std::min(n, s + std::size_t(cfg.batch_size));
      const std::size_t m = end - s;
      std::vector<Tensor<float>> pseudo(m);
      std::vector<BackdoorLoss> losses(m);
      std::vector<GradSet<float>> parts(m);
      nn::parallel_for(m, cfg.workers, [&](std::size_t k) {
        const std::size_t i = order[s + k];
        if (cfg.mode == TrainMode::robust) pseudo[k] = attack->poison(data.lq[i], keys[s + k]).as<float>();
        parts[k] = GradSet<float>(model.params());
        const Tensor<float> none;
        losses[k] = victim_sample_loss(model, lq[i], gt[i], needs_attack ? pois[i] : none, pseudo[k],
                                       needs_attack ? target[i] : none, cfg, &parts[k]);
      });
      BackdoorLoss bl;
      grads.zero();
      for (std::size_t k = 0; k < m; ++k) {
        grads += parts[k];
        bl.clean += losses[k].clean;
        bl.poison += losses[k].poison;
        bl.pseudo += losses[k].pseudo;
        bl.total += losses[k].total;
      }
      if (!std::isfinite(bl.total)) throw DivergenceError("train_victim: non-finite loss", batch_index);
      grads *= 1.0f / float(m);
      opt.step(model.params(), grads);
      sum.clean += bl.clean;
      sum.poison += bl.poison;
      sum.pseudo += bl.pseudo;
      sum.total += bl.total;
      ++batch_index;
    }
    const double dn = double(n);
    res.history.push_back({e, {sum.clean / dn, sum.poison / dn, sum.pseudo / dn, sum.total / dn}});
  }
  return res;
}

}  // namespace freqdoor
