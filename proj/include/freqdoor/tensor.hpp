#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <new>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "freqdoor/errors.hpp"

namespace freqdoor {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; derives independent stream seeds from one base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// 64-byte aligned storage. Vectorised kernels peel differently depending on
/// the start address, so a fixed alignment keeps results bitwise repeatable.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <class U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) { return true; }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

struct Shape {
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t size() const { return std::size_t(c) * std::size_t(h) * std::size_t(w); }
  std::size_t plane() const { return std::size_t(h) * std::size_t(w); }
  friend bool operator==(const Shape&, const Shape&) = default;
  std::string str() const {
    return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }
};

/// Dense channel-planar tensor (C x H x W). Convolution weights use
/// (out, in, k*k) and vectors use (n, 1, 1).
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape_(s), data_(s.size(), fill) {}
  Tensor(int c, int h, int w, T fill = T(0)) : Tensor(Shape{c, h, w}, fill) {}

  const Shape& shape() const { return shape_; }
  int channels() const { return shape_.c; }
  int height() const { return shape_.h; }
  int width() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  AlignedVector<T>& vec() { return data_; }
  const AlignedVector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  const T& at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  T* channel(int c) { return data_.data() + std::size_t(c) * shape_.plane(); }
  const T* channel(int c) const { return data_.data() + std::size_t(c) * shape_.plane(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  void reshape(Shape s) {
    require(s.size() == data_.size(), "reshape size mismatch");
    shape_ = s;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  Tensor& operator+=(const Tensor& o) {
    require(o.shape_ == shape_, "tensor += shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Tensor& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t index(int c, int y, int x) const {
    return (std::size_t(c) * shape_.h + std::size_t(y)) * shape_.w + std::size_t(x);
  }

  Shape shape_{};
  AlignedVector<T> data_;
};

template <class T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "max_abs_diff shape mismatch");
  T m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <class T>
Tensor<T> random_normal(Shape s, Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor<T> t(s);
  for (auto& v : t.vec()) v = static_cast<T>(dist(rng));
  return t;
}

template <class T>
Tensor<T> random_uniform(Shape s, Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<T> t(s);
  for (auto& v : t.vec()) v = static_cast<T>(dist(rng));
  return t;
}

}  // namespace freqdoor
