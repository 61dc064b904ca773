#pragma once

// Tape-based reverse-mode differentiation over channel-planar tensors.
// A Graph records one forward pass; nodes are appended in evaluation order so
// the reverse sweep is a plain backwards walk.

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "freqdoor/params.hpp"
#include "freqdoor/tensor.hpp"

namespace freqdoor::ag {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

template <class T>
class Graph {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MapM = Eigen::Map<Mat>;
  using CMapM = Eigen::Map<const Mat>;

  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  Var constant(Tensor<T> t) { return push(std::move(t), false); }

  /// Differentiable leaf (e.g. an input image whose gradient is wanted).
  Var input(Tensor<T> t) { return push(std::move(t), record_); }

  Var param(const ParamSet<T>& ps, std::size_t index) {
    Node n;
    n.ref = &ps[index];
    n.needs_grad = record_;
    n.param_index = static_cast<long>(index);
    nodes_.push_back(std::move(n));
    return Var{int(nodes_.size()) - 1};
  }

  const Tensor<T>& value(Var v) const { return nodes_[v.id].value(); }
  T scalar(Var v) const { return value(v)[0]; }
  const Shape& shape(Var v) const { return value(v).shape(); }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  /// Gradient of the last backward() target w.r.t. v (zeros if unreached).
  Tensor<T> grad(Var v) const {
    const auto& n = nodes_[v.id];
    return n.grad.empty() ? Tensor<T>(n.value().shape()) : n.grad;
  }

  void backward(Var loss) {
    require(value(loss).size() == 1, "backward needs a scalar");
    for (auto& n : nodes_) n.grad = Tensor<T>();
    acc(loss.id).fill(T(1));
    for (int i = loss.id; i >= 0; --i) {
      auto& n = nodes_[i];
      if (n.back && !n.grad.empty()) n.back(*this);
    }
  }

  void add_param_grads(GradSet<T>& out) const {
    for (const auto& n : nodes_) {
      if (n.param_index >= 0 && !n.grad.empty()) out.grads[std::size_t(n.param_index)] += n.grad;
    }
  }

  // ---------------------------------------------------------------- ops

  /// 2-D convolution, zero padding. w: (out, in, k*k), b: (out, 1, 1).
  Var conv2d(Var x, Var w, Var b, int stride, int pad) {
    const auto& xs = shape(x);
    const auto& ws = shape(w);
    const int k = static_cast<int>(std::lround(std::sqrt(double(ws.w))));
    require(k * k == ws.w && ws.h == xs.c, "conv2d weight/input mismatch: " + ws.str() + " vs " + xs.str());
    require(shape(b).size() == std::size_t(ws.c), "conv2d bias mismatch");
    const int ho = (xs.h + 2 * pad - k) / stride + 1;
    const int wo = (xs.w + 2 * pad - k) / stride + 1;
    require(ho > 0 && wo > 0, "conv2d output empty");
    const int rows = xs.c * k * k;
    const int cols_n = ho * wo;
    const bool direct = (k == 1 && stride == 1 && pad == 0);

    std::shared_ptr<T[]> cols;
    const T* cptr = value(x).data();
    if (!direct) {
      cols = std::shared_ptr<T[]>(aligned_buffer(std::size_t(rows) * cols_n), AlignedDeleter{});
      im2col(value(x), k, stride, pad, ho, wo, cols.get());
      cptr = cols.get();
    }
    Tensor<T> out(ws.c, ho, wo);
    MapM o(out.data(), ws.c, cols_n);
    CMapM W(value(w).data(), ws.c, rows);
    CMapM C(cptr, rows, cols_n);
    o.noalias() = W * C;
    const auto& bv = value(b);
    for (int co = 0; co < ws.c; ++co) o.row(co).array() += bv[co];

    const bool ng = record_ && (needs_grad(x) || needs_grad(w) || needs_grad(b));
    Var y = push(std::move(out), ng);
    if (ng) {
      const Shape xshape = xs;
      nodes_[y.id].back = [=](Graph& g) {
        const auto& gy = g.nodes_[y.id].grad;
        CMapM G(gy.data(), ws.c, cols_n);
        const T* cp = direct ? g.value(x).data() : cols.get();
        CMapM Cm(cp, rows, cols_n);
        if (g.needs_grad(w)) {
          MapM gw(g.acc(w.id).data(), ws.c, rows);
          gw.noalias() += G * Cm.transpose();
        }
        if (g.needs_grad(b)) {
          auto& gb = g.acc(b.id);
          for (int co = 0; co < ws.c; ++co) gb[co] += G.row(co).sum();
        }
        if (g.needs_grad(x)) {
          CMapM Wm(g.value(w).data(), ws.c, rows);
          auto& gx = g.acc(x.id);
          if (direct) {
            MapM gxm(gx.data(), rows, cols_n);
            gxm.noalias() += Wm.transpose() * G;
          } else {
            std::unique_ptr<T[], AlignedDeleter> dcols(aligned_buffer(std::size_t(rows) * cols_n));
            MapM D(dcols.get(), rows, cols_n);
            D.noalias() = Wm.transpose() * G;
            col2im(dcols.get(), xshape, k, stride, pad, ho, wo, gx);
          }
        }
      };
    }
    return y;
  }

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    Tensor<T> out = value(a);
    out += value(b);
    const bool ng = record_ && (needs_grad(a) || needs_grad(b));
    Var y = push(std::move(out), ng);
    if (ng) {
      nodes_[y.id].back = [=](Graph& g) {
        const auto& gy = g.nodes_[y.id].grad;
        if (g.needs_grad(a)) g.acc(a.id) += gy;
        if (g.needs_grad(b)) g.acc(b.id) += gy;
      };
    }
    return y;
  }

  Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    Tensor<T> out = value(a);
    const auto& bv = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    const bool ng = record_ && (needs_grad(a) || needs_grad(b));
    Var y = push(std::move(out), ng);
    if (ng) {
      nodes_[y.id].back = [=](Graph& g) {
        const auto& gy = g.nodes_[y.id].grad;
        if (g.needs_grad(a)) g.acc(a.id) += gy;
        if (g.needs_grad(b)) {
          auto& gb = g.acc(b.id);
          for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
        }
      };
    }
    return y;
  }

  Var mul(Var a, Var b) {
    check_same(a, b, "mul");
    Tensor<T> out = value(a);
    const auto& bv = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    const bool ng = record_ && (needs_grad(a) || needs_grad(b));
    Var y = push(std::move(out), ng);
    if (ng) {
      nodes_[y.id].back = [=](Graph& g) {
        const auto& gy = g.nodes_[y.id].grad;
        if (g.needs_grad(a)) {
          auto& ga = g.acc(a.id);
          const auto& bv2 = g.value(b);
          for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bv2[i];
        }
        if (g.needs_grad(b)) {
          auto& gb = g.acc(b.id);
          const auto& av = g.value(a);
          for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * av[i];
        }
      };
    }
    return y;
  }

  Var scale(Var a, T s) {
    Tensor<T> out = value(a);
    out *= s;
    const bool ng = record_ && needs_grad(a);
    Var y = push(std::move(out), ng);
    if (ng) {
      nodes_[y.id].back = [=](Graph& g) {
        const auto& gy = g.nodes_[y.id].grad;
        auto& ga = g.acc(a.id);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * s;
      };
    }
    return y;
  }

  Var relu(Var a) {
    return unary(a, [](T v) { return v > T(0) ? v : T(0); },
                 [](T v, T) { return v > T(0) ? T(1) : T(0); });
  }

  Var sigmoid(Var a) {
    return unary(a, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
                 [](T, T yv) { return yv * (T(1) - yv); });
  }

  Var tanh(Var a) {
    return unary(a, [](T v) { return std::tanh(v); }, [](T, T yv) { return T(1) - yv * yv; });
  }

  /// Gradient passes where lo <= x <= hi.
  Var clamp(Var a, T lo, T hi) {
    return unary(a, [=](T v) { return std::clamp(v, lo, hi); },
                 [=](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
  }

  /// x (C,H,W) times one scalar per channel s (C,1,1).
  Var channel_mul(Var x, Var s) {
    const auto& xs = shape(x);
    require(shape(s).size() == std::size_t(xs.c), "channel_mul: scale length must equal channels");
    Tensor<T> out = value(x);
    const auto& sv = value(s);
    const std::size_t plane = xs.plane();
    for (int c = 0; c < xs.c; ++c) {
      T* p = out.channel(c);
      for (std::size_t i = 0; i < plane; ++i) p[i] *= sv[c];
    }
    const bool ng = record_ && (needs_grad(x) || needs_grad(s));
    Var y = push(std::move(out), ng);
    if (ng) {
      nodes_[y.id].back = [=](Graph& g) {
        const auto& gy = g.nodes_[y.id].grad;
        const auto& xv = g.value(x);
        const auto& svv = g.value(s);
        if (g.needs_grad(x)) {
          auto& gx = g.acc(x.id);
          for (int c = 0; c < xs.c; ++c) {
            const T* gp = gy.channel(c);
            T* dp = gx.channel(c);
            for (std::size_t i = 0; i < plane; ++i) dp[i] += gp[i] * svv[c];
          }
        }
        if (g.needs_grad(s)) {
          auto& gs = g.acc(s.id);
          for (int c = 0; c < xs.c; ++c) {
            const T* gp = gy.channel(c);
            const T* xp = xv.channel(c);
            T acc = 0;
            for (std::size_t i = 0; i < plane; ++i) acc += gp[i] * xp[i];
            gs[c] += acc;
          }
        }
      };
    }
    return y;
  }

  /// Global average pool: (C,H,W) -> (C,1,1).
  Var gap(Var x) {
    const auto& xs = shape(x);
    const std::size_t plane = xs.plane();
    Tensor<T> out(xs.c, 1, 1);
    const auto& xv = value(x);
    for (int c = 0; c < xs.c; ++c) {
      const T* p = xv.channel(c);
      T acc = 0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      out[c] = acc / T(plane);
    }
    const bool ng = record_ && needs_grad(x);
    Var y = push(std::move(out), ng);
    if (ng) {
      nodes_[y.id].back = [=](Graph& g) {
        const auto& gy = g.nodes_[y.id].grad;
        auto& gx = g.acc(x.id);
        for (int c = 0; c < xs.c; ++c) {
          const T v = gy[c] / T(plane);
          T* dp = gx.channel(c);
          for (std::size_t i = 0; i < plane; ++i) dp[i] += v;
        }
      };
    }
    return y;
  }

  /// Nearest-neighbour resize to (h, w).
  Var upsample_to(Var x, int h, int w) {
    const auto& xs = shape(x);
    Tensor<T> out(xs.c, h, w);
    const auto& xv = value(x);
    std::vector<int> ys(h), xs_idx(w);
    for (int i = 0; i < h; ++i) ys[i] = int((long(i) * xs.h) / h);
    for (int j = 0; j < w; ++j) xs_idx[j] = int((long(j) * xs.w) / w);
    for (int c = 0; c < xs.c; ++c)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) out.at(c, i, j) = xv.at(c, ys[i], xs_idx[j]);
    const bool ng = record_ && needs_grad(x);
    Var y = push(std::move(out), ng);
    if (ng) {
      nodes_[y.id].back = [=](Graph& g) {
        const auto& gy = g.nodes_[y.id].grad;
        auto& gx = g.acc(x.id);
        for (int c = 0; c < xs.c; ++c)
          for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) gx.at(c, ys[i], xs_idx[j]) += gy.at(c, i, j);
      };
    }
    return y;
  }

  /// Softmax over consecutive groups of `group` entries of a flat tensor.
  Var softmax_groups(Var x, int group) {
    const auto& xv = value(x);
    require(group > 0 && xv.size() % std::size_t(group) == 0, "softmax_groups: size not divisible");
    Tensor<T> out(xv.shape());
    const std::size_t ng_count = xv.size() / std::size_t(group);
    for (std::size_t gi = 0; gi < ng_count; ++gi) {
      const T* in = xv.data() + gi * group;
      T* o = out.data() + gi * group;
      T mx = *std::max_element(in, in + group);
      T sum = 0;
      for (int t = 0; t < group; ++t) sum += (o[t] = std::exp(in[t] - mx));
      for (int t = 0; t < group; ++t) o[t] /= sum;
    }
    const bool ng = record_ && needs_grad(x);
    Var y = push(std::move(out), ng);
    if (ng) {
      nodes_[y.id].back = [=](Graph& g) {
        const auto& gy = g.nodes_[y.id].grad;
        const auto& yv = g.value(y);
        auto& gx = g.acc(x.id);
        for (std::size_t gi = 0; gi < ng_count; ++gi) {
          const std::size_t o = gi * group;
          T dot = 0;
          for (int t = 0; t < group; ++t) dot += gy[o + t] * yv[o + t];
          for (int t = 0; t < group; ++t) gx[o + t] += yv[o + t] * (gy[o + t] - dot);
        }
      };
    }
    return y;
  }

  /// Per-channel k x k filtering with replicate borders. kernels: (C*k*k,1,1).
  Var depthwise(Var f, Var kernels) {
    const auto& fs = shape(f);
    const std::size_t kk_total = value(kernels).size();
    require(kk_total % std::size_t(fs.c) == 0, "depthwise: kernel count mismatch");
    const int kk = int(kk_total / std::size_t(fs.c));
    const int k = static_cast<int>(std::lround(std::sqrt(double(kk))));
    require(k * k == kk && k % 2 == 1, "depthwise: kernel must be odd square");
    Tensor<T> out(fs);
    depthwise_forward(value(f), value(kernels), k, out);
    const bool ng = record_ && (needs_grad(f) || needs_grad(kernels));
    Var y = push(std::move(out), ng);
    if (ng) {
      nodes_[y.id].back = [=](Graph& g) {
        const auto& gy = g.nodes_[y.id].grad;
        const auto& fv = g.value(f);
        const auto& kv = g.value(kernels);
        const int r = k / 2;
        Tensor<T>* gf = g.needs_grad(f) ? &g.acc(f.id) : nullptr;
        Tensor<T>* gk = g.needs_grad(kernels) ? &g.acc(kernels.id) : nullptr;
        for (int c = 0; c < fs.c; ++c) {
          for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx) {
              const int t = (dy + r) * k + (dx + r);
              const T wv = kv[std::size_t(c) * kk + t];
              T acc = 0;
              for (int yy = 0; yy < fs.h; ++yy) {
                const int sy = std::clamp(yy + dy, 0, fs.h - 1);
                for (int xx = 0; xx < fs.w; ++xx) {
                  const int sx = std::clamp(xx + dx, 0, fs.w - 1);
                  const T gv = gy.at(c, yy, xx);
                  acc += gv * fv.at(c, sy, sx);
                  if (gf) gf->at(c, sy, sx) += gv * wv;
                }
              }
              if (gk) (*gk)[std::size_t(c) * kk + t] += acc;
            }
          }
        }
      };
    }
    return y;
  }

  /// Weighted sum of same-shaped terms.
  Var weighted_sum(const std::vector<std::pair<Var, T>>& terms) {
    require(!terms.empty(), "weighted_sum: no terms");
    Tensor<T> out(shape(terms.front().first));
    bool ng = false;
    for (const auto& [v, wgt] : terms) {
      require(shape(v) == out.shape(), "weighted_sum: shape mismatch");
      const auto& vv = value(v);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += wgt * vv[i];
      ng = ng || needs_grad(v);
    }
    ng = ng && record_;
    Var y = push(std::move(out), ng);
    if (ng) {
      nodes_[y.id].back = [terms, y](Graph& g) {
        const auto& gy = g.nodes_[y.id].grad;
        for (const auto& [v, wgt] : terms) {
          if (!g.needs_grad(v)) continue;
          auto& gv = g.acc(v.id);
          for (std::size_t i = 0; i < gy.size(); ++i) gv[i] += wgt * gy[i];
        }
      };
    }
    return y;
  }

  /// Mean squared error against a constant target.
  Var mse(Var a, const Tensor<T>& target) {
    require(shape(a) == target.shape(), "mse shape mismatch");
    const auto& av = value(a);
    T acc = 0;
    for (std::size_t i = 0; i < av.size(); ++i) {
      const T d = av[i] - target[i];
      acc += d * d;
    }
    const T n = T(av.size());
    Tensor<T> out(1, 1, 1, acc / n);
    const bool ng = record_ && needs_grad(a);
    Var y = push(std::move(out), ng);
    if (ng) {
      nodes_[y.id].back = [=](Graph& g) {
        const T gy = g.nodes_[y.id].grad[0];
        const auto& av2 = g.value(a);
        auto& ga = g.acc(a.id);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy * T(2) * (av2[i] - target[i]) / n;
      };
    }
    return y;
  }

  /// Mean absolute error against a constant target.
  Var l1(Var a, const Tensor<T>& target) {
    require(shape(a) == target.shape(), "l1 shape mismatch");
    const auto& av = value(a);
    T acc = 0;
    for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(av[i] - target[i]);
    const T n = T(av.size());
    Tensor<T> out(1, 1, 1, acc / n);
    const bool ng = record_ && needs_grad(a);
    Var y = push(std::move(out), ng);
    if (ng) {
      nodes_[y.id].back = [=](Graph& g) {
        const T gy = g.nodes_[y.id].grad[0];
        const auto& av2 = g.value(a);
        auto& ga = g.acc(a.id);
        for (std::size_t i = 0; i < ga.size(); ++i) {
          const T d = av2[i] - target[i];
          const T sg = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
          ga[i] += gy * sg / n;
        }
      };
    }
    return y;
  }

  /// Euclidean norm of all entries.
  Var l2norm(Var a) {
    const auto& av = value(a);
    T acc = 0;
    for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * av[i];
    const T nrm = std::sqrt(acc);
    const bool ng = record_ && needs_grad(a);
    Var y = push(Tensor<T>(1, 1, 1, nrm), ng);
    if (ng) {
      nodes_[y.id].back = [=](Graph& g) {
        if (nrm == T(0)) return;
        const T gy = g.nodes_[y.id].grad[0];
        const auto& av2 = g.value(a);
        auto& ga = g.acc(a.id);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy * av2[i] / nrm;
      };
    }
    return y;
  }

 private:
  struct Node {
    Tensor<T> own;
    const Tensor<T>* ref = nullptr;
    Tensor<T> grad;
    bool needs_grad = false;
    long param_index = -1;
    std::function<void(Graph&)> back;

    const Tensor<T>& value() const { return ref ? *ref : own; }
  };

  Var push(Tensor<T> v, bool needs) {
    Node n;
    n.own = std::move(v);
    n.needs_grad = needs;
    nodes_.push_back(std::move(n));
    return Var{int(nodes_.size()) - 1};
  }

  Tensor<T>& acc(int id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor<T>(n.value().shape());
    return n.grad;
  }

  void check_same(Var a, Var b, const char* op) const {
    require(shape(a) == shape(b), std::string(op) + ": shape mismatch " + shape(a).str() + " vs " +
                                      shape(b).str());
  }

  template <class F, class D>
  Var unary(Var a, F f, D df) {
    Tensor<T> out = value(a);
    for (auto& v : out.vec()) v = f(v);
    const bool ng = record_ && needs_grad(a);
    Var y = push(std::move(out), ng);
    if (ng) {
      nodes_[y.id].back = [=](Graph& g) {
        const auto& gy = g.nodes_[y.id].grad;
        const auto& av = g.value(a);
        const auto& yv = g.value(y);
        auto& ga = g.acc(a.id);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * df(av[i], yv[i]);
      };
    }
    return y;
  }

  struct AlignedDeleter {
    void operator()(T* p) const { ::operator delete[](p, std::align_val_t{64}); }
  };

  static T* aligned_buffer(std::size_t n) { return static_cast<T*>(::operator new[](n * sizeof(T), std::align_val_t{64})); }

  // Output columns ox in [lo, hi) read input columns inside [0, n).
  static void valid_range(int n, int s, int p, int kx, int wo, int& lo, int& hi) {
    lo = std::max(0, (p - kx + s - 1) / s);
    if (p - kx < 0) lo = 0;
    hi = std::min(wo, (n - 1 + p - kx) / s + 1);
    if (n - 1 + p - kx < 0) hi = 0;
    lo = std::min(lo, std::max(hi, 0));
  }

  static void im2col(const Tensor<T>& x, int k, int s, int p, int ho, int wo, T* cols) {
    const auto& xs = x.shape();
    const std::size_t n = std::size_t(ho) * wo;
    for (int ci = 0; ci < xs.c; ++ci) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          T* row = cols + (std::size_t(ci) * k * k + std::size_t(ky) * k + kx) * n;
          int lo, hi;
          valid_range(xs.w, s, p, kx, wo, lo, hi);
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * s - p + ky;
            T* r = row + std::size_t(oy) * wo;
            if (iy < 0 || iy >= xs.h) {
              std::fill(r, r + wo, T(0));
              continue;
            }
            std::fill(r, r + lo, T(0));
            std::fill(r + hi, r + wo, T(0));
            const T* src = x.channel(ci) + std::size_t(iy) * xs.w;
            if (s == 1) {
              if (hi > lo) std::copy(src + (lo - p + kx), src + (hi - p + kx), r + lo);
            } else {
              for (int ox = lo; ox < hi; ++ox) r[ox] = src[ox * s - p + kx];
            }
          }
        }
      }
    }
  }

  static void col2im(const T* cols, const Shape& xs, int k, int s, int p, int ho, int wo,
                     Tensor<T>& gx) {
    const std::size_t n = std::size_t(ho) * wo;
    for (int ci = 0; ci < xs.c; ++ci) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const T* row = cols + (std::size_t(ci) * k * k + std::size_t(ky) * k + kx) * n;
          int lo, hi;
          valid_range(xs.w, s, p, kx, wo, lo, hi);
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * s - p + ky;
            if (iy < 0 || iy >= xs.h) continue;
            T* dst = gx.channel(ci) + std::size_t(iy) * xs.w;
            const T* r = row + std::size_t(oy) * wo;
            for (int ox = lo; ox < hi; ++ox) dst[ox * s - p + kx] += r[ox];
          }
        }
      }
    }
  }

 public:
  static void depthwise_forward(const Tensor<T>& f, const Tensor<T>& kernels, int k, Tensor<T>& out) {
    const auto& fs = f.shape();
    const int r = k / 2;
    const int kk = k * k;
    out.fill(T(0));
    for (int c = 0; c < fs.c; ++c) {
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const T wv = kernels[std::size_t(c) * kk + (dy + r) * k + (dx + r)];
          for (int yy = 0; yy < fs.h; ++yy) {
            const int sy = std::clamp(yy + dy, 0, fs.h - 1);
            const T* src = f.channel(c) + std::size_t(sy) * fs.w;
            T* dst = out.channel(c) + std::size_t(yy) * fs.w;
            for (int xx = 0; xx < fs.w; ++xx) {
              dst[xx] += wv * src[std::clamp(xx + dx, 0, fs.w - 1)];
            }
          }
        }
      }
    }
  }

 private:
  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace freqdoor::ag
