#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "freqdoor/autograd.hpp"
#include "freqdoor/params.hpp"

namespace freqdoor::nn {

using ag::Graph;
using ag::Var;

/// Conv layer handle: indices into a ParamSet plus geometry.
struct Conv {
  std::size_t w = 0;
  std::size_t b = 0;
  int in = 0;
  int out = 0;
  int k = 3;
  int stride = 1;

  /// Registers "<name>.w" (out, in, k*k) and "<name>.b". He-normal scaled by
  /// gain; gain 0 gives an all-zero layer.
  template <class T>
  static Conv make(ParamSet<T>& ps, const std::string& name, int in, int out, int k, int stride, Rng& rng,
                   double gain = 1.0) {
    Conv c;
    c.in = in;
    c.out = out;
    c.k = k;
    c.stride = stride;
    c.w = ps.add(name + ".w", Shape{out, in, k * k});
    c.b = ps.add(name + ".b", Shape{out, 1, 1});
    if (gain > 0.0) init_he(ps[c.w], rng, gain);
    return c;
  }

  template <class T>
  Var operator()(Graph<T>& g, const ParamSet<T>& ps, Var x) const {
    return g.conv2d(x, g.param(ps, w), g.param(ps, b), stride, k / 2);
  }
};

/// Squeeze-and-excitation gate: sigmoid(fc2(relu(fc1(gap(x))))), one value
/// per channel in (0,1).
struct SqueezeExcite {
  Conv fc1;
  Conv fc2;

  template <class T>
  static SqueezeExcite make(ParamSet<T>& ps, const std::string& name, int channels, Rng& rng) {
    const int hidden = std::max(4, channels / 4);
    return {Conv::make(ps, name + ".fc1", channels, hidden, 1, 1, rng),
            Conv::make(ps, name + ".fc2", hidden, channels, 1, 1, rng)};
  }

  template <class T>
  Var operator()(Graph<T>& g, const ParamSet<T>& ps, Var x) const {
    return g.sigmoid(fc2(g, ps, g.relu(fc1(g, ps, g.gap(x)))));
  }
};

/// Runs fn(0..n-1) on up to `workers` threads. Callers write results into
/// per-index slots so the outcome does not depend on scheduling. The first
/// exception by index is rethrown.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t nt = std::min<std::size_t>(std::size_t(workers), n);
  for (std::size_t t = 0; t < nt; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace freqdoor::nn
