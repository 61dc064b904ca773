#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "freqdoor/tensor.hpp"

namespace freqdoor {

/// Ordered, named collection of trainable tensors.
template <class T>
class ParamSet {
 public:
  std::size_t add(std::string name, Shape shape) {
    require(!index_.contains(name), "duplicate parameter name: " + name);
    index_.emplace(name, values_.size());
    names_.push_back(std::move(name));
    values_.emplace_back(shape);
    return values_.size() - 1;
  }

  std::size_t count() const { return values_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor<T>& operator[](std::size_t i) { return values_[i]; }
  const Tensor<T>& operator[](std::size_t i) const { return values_[i]; }
  Tensor<T>& operator[](const std::string& n) { return values_[index_of(n)]; }
  const Tensor<T>& operator[](const std::string& n) const { return values_[index_of(n)]; }

  std::size_t index_of(const std::string& n) const {
    auto it = index_.find(n);
    require(it != index_.end(), "unknown parameter: " + n);
    return it->second;
  }
  bool contains(const std::string& n) const { return index_.contains(n); }

  std::vector<Tensor<T>>& values() { return values_; }
  const std::vector<Tensor<T>>& values() const { return values_; }

  template <class U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (std::size_t i = 0; i < values_.size(); ++i) {
      out.add(names_[i], values_[i].shape());
      out[i] = values_[i].template cast<U>();
    }
    return out;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
  std::map<std::string, std::size_t> index_;
};

/// Gradient buffers aligned with a ParamSet.
template <class T>
struct GradSet {
  std::vector<Tensor<T>> grads;

  GradSet() = default;
  explicit GradSet(const ParamSet<T>& ps) {
    grads.reserve(ps.count());
    for (const auto& v : ps.values()) grads.emplace_back(v.shape());
  }

  void zero() {
    for (auto& g : grads) g.fill(T(0));
  }

  GradSet& operator+=(const GradSet& o) {
    for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += o.grads[i];
    return *this;
  }

  GradSet& operator*=(T s) {
    for (auto& g : grads) g *= s;
    return *this;
  }
};

/// He-normal initialisation for a conv weight of shape (out, in, k*k).
template <class T>
void init_he(Tensor<T>& w, Rng& rng, double gain = 1.0) {
  const double fan_in = double(w.height()) * double(w.width());
  std::normal_distribution<double> dist(0.0, gain * std::sqrt(2.0 / fan_in));
  for (auto& v : w.vec()) v = static_cast<T>(dist(rng));
}

/// Adam with bias correction.
template <class T>
class Adam {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(const ParamSet<T>& ps, Options opt) : opt_(opt), m_(ps), v_(ps) {}

  void step(ParamSet<T>& ps, const GradSet<T>& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, double(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, double(t_));
    for (std::size_t i = 0; i < ps.count(); ++i) {
      auto& p = ps[i];
      auto& m = m_.grads[i];
      auto& v = v_.grads[i];
      const auto& gi = g.grads[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double gj = gi[j];
        m[j] = static_cast<T>(opt_.beta1 * m[j] + (1.0 - opt_.beta1) * gj);
        v[j] = static_cast<T>(opt_.beta2 * v[j] + (1.0 - opt_.beta2) * gj * gj);
        const double mh = m[j] / c1;
        const double vh = v[j] / c2;
        p[j] = static_cast<T>(p[j] - opt_.lr * mh / (std::sqrt(vh) + opt_.eps));
      }
    }
  }

  long steps() const { return t_; }

 private:
  Options opt_;
  GradSet<T> m_;
  GradSet<T> v_;
  long t_ = 0;
};

}  // namespace freqdoor
