#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "freqdoor/injector.hpp"

namespace freqdoor {

struct InjectorTrainConfig {
  double alpha = 0.1;
  double epsilon = 8.0 / 255.0;
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 20;
  /// Probability that a sample is paired with trigger_corpus[0] (the
  /// authentic trigger) rather than a uniformly drawn corpus member.
  double authentic_fraction = 0.5;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const {
    require(alpha >= 0.0 && alpha <= 1.0, "alpha must be in [0,1]");
    require(epsilon > 0.0 && epsilon <= 0.1, "epsilon must be in (0, 0.1]");
    require(learning_rate > 0.0, "learning rate must be positive");
    require(batch_size >= 1 && epochs >= 0, "batch size must be >= 1 and epochs >= 0");
    require(authentic_fraction >= 0.0 && authentic_fraction <= 1.0, "authentic_fraction must be in [0,1]");
  }
};

struct InjectorLoss {
  double image = 0;     ///< MSE(I_p, I)
  double recovery = 0;  ///< MSE(D(I_p - I), I_t)
  double total = 0;
};

struct InjectorEpoch {
  int epoch = 0;
  InjectorLoss mean;
};

struct InjectorTrainResult {
  Injector<float> injector;
  std::vector<InjectorEpoch> history;
  std::vector<double> batch_losses;
};

/// alpha * MSE(I_p, I) + (1 - alpha) * MSE(D(I_p - I), I_t) for one pair.
/// Accumulates parameter gradients into `grads` when given.
template <class T>
InjectorLoss injector_sample_loss(const Injector<T>& inj, const Tensor<T>& benign, const Tensor<T>& trigger,
                                  double alpha, GradSet<T>* grads = nullptr) {
  ag::Graph<T> g(grads != nullptr);
  const auto b = g.constant(benign);
  const auto ip = inj.poison(g, b, g.constant(trigger));
  const auto li = g.mse(ip, benign);
  const auto lr = g.mse(inj.recover_raw(g, g.sub(ip, b)), trigger);
  const auto total = g.weighted_sum({{li, T(alpha)}, {lr, T(1.0 - alpha)}});
  if (grads) {
    g.backward(total);
    g.add_param_grads(*grads);
  }
  return {double(g.scalar(li)), double(g.scalar(lr)), double(g.scalar(total))};
}

/// Batch mean of injector_sample_loss; `grads` (if given) receives the mean
/// gradient. Per-sample gradients are reduced in index order.
template <class T>
InjectorLoss injector_batch_loss(const Injector<T>& inj, const std::vector<Tensor<T>>& benign,
                                 const std::vector<Tensor<T>>& triggers, double alpha, GradSet<T>* grads = nullptr,
                                 int workers = 1) {
  require(!benign.empty() && benign.size() == triggers.size(), "injector batch: size mismatch");
  const std::size_t n = benign.size();
  std::vector<InjectorLoss> losses(n);
  std::vector<GradSet<T>> parts(grads ? n : 0);
  nn::parallel_for(n, workers, [&](std::size_t i) {
    GradSet<T>* gi = nullptr;
    if (grads) {
      parts[i] = GradSet<T>(inj.params());
      gi = &parts[i];
    }
    losses[i] = injector_sample_loss(inj, benign[i], triggers[i], alpha, gi);
  });
  InjectorLoss m;
  for (const auto& l : losses) {
    m.image += l.image;
    m.recovery += l.recovery;
    m.total += l.total;
  }
  m.image /= double(n);
  m.recovery /= double(n);
  m.total /= double(n);
  if (grads) {
    grads->zero();
    for (auto& p : parts) *grads += p;
    *grads *= T(1.0 / double(n));
  }
  return m;
}

/// Trains the injector with Adam. Sample order and trigger pairing come from
/// mt19937_64(cfg.seed); results do not depend on cfg.workers.
inline InjectorTrainResult train_injector(const std::vector<Image>& benign_corpus,
                                          const std::vector<Image>& trigger_corpus, const InjectorTrainConfig& cfg,
                                          InjectorConfig arch = {}) {
  cfg.validate();
  require(!benign_corpus.empty(), "train_injector: empty benign corpus");
  require(!trigger_corpus.empty(), "train_injector: empty trigger corpus");
  for (const auto& t : trigger_corpus) require_same_shape(t, benign_corpus.front(), "train_injector");
  arch.epsilon = cfg.epsilon;
  arch.channels = benign_corpus.front().channels();

  InjectorTrainResult res{Injector<float>(arch), {}, {}};
  auto& inj = res.injector;
  Adam<float> opt(inj.params(), {.lr = cfg.learning_rate});
  GradSet<float> grads(inj.params());
  Rng rng(derive_seed(cfg.seed, 17));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, trigger_corpus.size() - 1);

  std::vector<Tensor<float>> benign(benign_corpus.size()), triggers(trigger_corpus.size());
  for (std::size_t i = 0; i < benign.size(); ++i) benign[i] = benign_corpus[i].as<float>();
  for (std::size_t i = 0; i < triggers.size(); ++i) triggers[i] = trigger_corpus[i].as<float>();

  std::vector<std::size_t> order(benign.size());
  std::size_t batch_index = 0;
  for (int e = 0; e < cfg.epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    InjectorLoss sum;
    std::size_t seen = 0;
    for (std::size_t s = 0; s < order.size(); s += std::size_t(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), s + std::size_t(cfg.batch_size));
      std::vector<Tensor<float>> xb, tb;
      for (std::size_t k = s; k < end; ++k) {
        xb.push_back(benign[order[k]]);
        const std::size_t ti = u01(rng) < cfg.authentic_fraction ? 0 : pick(rng);
        tb.push_back(triggers[ti]);
      }
      const auto l = injector_batch_loss(inj, xb, tb, cfg.alpha, &grads, cfg.workers);
      if (!std::isfinite(l.total)) throw DivergenceError("train_injector: non-finite loss", batch_index);
      opt.step(inj.params(), grads);
      res.batch_losses.push_back(l.total);
      const double w = double(end - s);
      sum.image += l.image * w;
      sum.recovery += l.recovery * w;
      sum.total += l.total * w;
      seen += end - s;
      ++batch_index;
    }
    res.history.push_back({e, {sum.image / double(seen), sum.recovery / double(seen), sum.total / double(seen)}});
  }
  return res;
}

}  // namespace freqdoor
