// Copyright 2026  The sambr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Minimal reverse-mode automatic differentiation over dense 2-D double
// tensors. Every op appends a node to a Tape; backward() sweeps the tape in
// reverse append order, so each node is visited exactly once.
//
// There is no implicit broadcasting: tile_rows() and reshape() must be used
// explicitly.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sambr/error.hpp"

namespace sambr::ad {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + ")";
}

/// Row-major dense value. Scalars are 1x1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, std::vector<double> data)
      : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size())
      throw DimensionError("tensor data length " +
                           std::to_string(data_.size()) + " != shape " +
                           to_string(shape_));
  }

  static Tensor scalar(double v) { return Tensor({1, 1}, std::vector{v}); }
  static Tensor row(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor({1, n}, std::move(v));
  }
  static Tensor matrix(std::size_t r, std::size_t c,
                       std::initializer_list<double> v) {
    return Tensor({r, c}, std::vector<double>(v));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t size() const { return data_.size(); }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * shape_.cols + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * shape_.cols + c];
  }
  double item() const {
    if (data_.size() != 1) throw ContractError("item() on non-scalar tensor");
    return data_[0];
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

enum class Op {
  kLeaf,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kAffine,  // alpha * a + beta
  kConcat,
  kSlice,
  kTanh,
  kSigmoid,
  kExp,
  kLog,
  kSoftmax,
  kLogSoftmax,
  kReduceSum,
  kReduceMean,
  kReshape,
  kPick,
  kTileRows,
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const;
  double item() const { return value().item(); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Parameter gradients keyed by parameter slot (see Tape::param).
using GradientMap = std::vector<Tensor>;

class Tape {
 public:
  struct Node {
    Op op = Op::kLeaf;
    int a = -1;
    int b = -1;
    std::vector<int> inputs;  // concat only
    Tensor value;
    std::vector<double> grad;  // allocated on first accumulation
    double alpha = 0.0;
    double beta = 0.0;
    std::size_t i0 = 0, i1 = 0, i2 = 0;
    bool tracked = false;
    int param_slot = -1;
  };

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Untracked value: receives no gradient.
  Var constant(Tensor t) {
    check_finite(t, "constant");
    return push(Op::kLeaf, std::move(t), false);
  }

  /// Tracked leaf without a parameter slot (its gradient is read via grad()).
  Var variable(Tensor t) {
    check_finite(t, "variable");
    return push(Op::kLeaf, std::move(t), true);
  }

  /// Tracked leaf whose gradient is reported under `slot` by backward().
  Var param(const Tensor& t, int slot) {
    Var v = push(Op::kLeaf, t, true);
    nodes_[v.id()].param_slot = slot;
    num_slots_ = std::max(num_slots_, slot + 1);
    return v;
  }

  std::size_t size() const { return nodes_.size(); }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const Tensor& value(Var v) const { return nodes_[v.id()].value; }

  /// Gradient accumulated at `v` by the last backward pass (zeros if none).
  Tensor grad(Var v) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(v.id()));
    if (n.grad.empty()) return Tensor(n.value.shape());
    return Tensor(n.value.shape(), n.grad);
  }

  /// Reverse sweep from a scalar loss. Returns one tensor per parameter slot
  /// (zeros for slots the loss does not depend on).
  GradientMap backward(Var loss) {
    own(loss);
    if (value(loss).size() != 1)
      throw ContractError("backward() needs a scalar loss, got " +
                          to_string(value(loss).shape()));
    return backward_from({{loss, Tensor::scalar(1.0)}});
  }

  /// Reverse sweep seeded with explicit gradients at arbitrary nodes.
  GradientMap backward_from(const std::vector<std::pair<Var, Tensor>>& seeds) {
    for (auto& n : nodes_) n.grad.clear();
    int top = -1;
    for (const auto& [v, g] : seeds) {
      own(v);
      Node& n = nodes_[v.id()];
      if (!(g.shape() == n.value.shape()))
        throw DimensionError("seed shape " + to_string(g.shape()) +
                             " != node shape " + to_string(n.value.shape()));
      if (!n.tracked) continue;
      auto& acc = grad_buffer(v.id());
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
      top = std::max(top, v.id());
    }
    for (int id = top; id >= 0; --id) propagate(id);

    GradientMap out(static_cast<std::size_t>(num_slots_));
    for (const auto& n : nodes_) {
      if (n.param_slot < 0) continue;
      Tensor& dst = out[static_cast<std::size_t>(n.param_slot)];
      if (dst.size() == 0) dst = Tensor(n.value.shape());
      if (n.grad.empty()) continue;
      for (std::size_t i = 0; i < n.grad.size(); ++i) dst[i] += n.grad[i];
    }
    return out;
  }

  // Op construction is exposed through the free functions below.
  Var push(Op op, Tensor value, bool tracked, int a = -1, int b = -1) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.value = std::move(value);
    n.tracked = tracked;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size() - 1));
  }
  Node& mutable_node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  bool tracked(Var v) const { return nodes_[v.id()].tracked; }

  void own(Var v) const {
    if (v.tape() != this || v.id() < 0 ||
        static_cast<std::size_t>(v.id()) >= nodes_.size())
      throw ContractError("variable does not belong to this tape");
  }

  static void check_finite(const Tensor& t, const char* what) {
    for (double x : t.data())
      if (!std::isfinite(x))
        throw NumericError(std::string("non-finite value produced by ") + what);
  }

 private:
  std::vector<double>& grad_buffer(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
  }

  void propagate(int id);

  std::vector<Node> nodes_;
  int num_slots_ = 0;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }
inline const Shape& Var::shape() const { return tape_->value(*this).shape(); }

namespace detail {

inline Tape* common_tape(Var a, Var b) {
  if (a.tape() != b.tape() || a.tape() == nullptr)
    throw ContractError("operands live on different tapes");
  return a.tape();
}

inline Var emit(Tape* t, Op op, Tensor value, const char* name, int a,
                int b = -1) {
  Tape::check_finite(value, name);
  const bool tr = (a >= 0 && t->tracked(Var(t, a))) ||
                  (b >= 0 && t->tracked(Var(t, b)));
  return t->push(op, std::move(value), tr, a, b);
}

inline void require_same_shape(Var a, Var b, const char* name) {
  if (!(a.shape() == b.shape()))
    throw DimensionError(std::string(name) + ": shape " + to_string(a.shape()) +
                         " vs " + to_string(b.shape()));
}

// c += a * b for row-major (m x k)(k x n).
inline void gemm_acc(const double* a, const double* b, double* c, std::size_t m,
                     std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
  Tape* t = detail::common_tape(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.cols != sb.rows)
    throw DimensionError("matmul " + to_string(sa) + " x " + to_string(sb));
  Tensor out({sa.rows, sb.cols});
  detail::gemm_acc(a.value().data().data(), b.value().data().data(),
                   out.data().data(), sa.rows, sa.cols, sb.cols);
  return detail::emit(t, Op::kMatMul, std::move(out), "matmul", a.id(), b.id());
}

inline Var add(Var a, Var b) {
  Tape* t = detail::common_tape(a, b);
  detail::require_same_shape(a, b, "add");
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return detail::emit(t, Op::kAdd, std::move(out), "add", a.id(), b.id());
}

inline Var sub(Var a, Var b) {
  Tape* t = detail::common_tape(a, b);
  detail::require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return detail::emit(t, Op::kSub, std::move(out), "sub", a.id(), b.id());
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
  Tape* t = detail::common_tape(a, b);
  detail::require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return detail::emit(t, Op::kMul, std::move(out), "mul", a.id(), b.id());
}

/// alpha * a + beta, elementwise.
inline Var affine(Var a, double alpha, double beta) {
  Tensor out = a.value();
  for (double& x : out.data()) x = alpha * x + beta;
  Var v = detail::emit(a.tape(), Op::kAffine, std::move(out), "affine", a.id());
  auto& n = a.tape()->mutable_node(v.id());
  n.alpha = alpha;
  n.beta = beta;
  return v;
}

inline Var scale(Var a, double s) { return affine(a, s, 0.0); }

/// Concatenate along axis 0 (rows) or 1 (columns).
inline Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw DimensionError("concat of nothing");
  if (axis != 0 && axis != 1) throw DimensionError("concat axis must be 0 or 1");
  Tape* t = parts[0].tape();
  Shape s = parts[0].shape();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    detail::common_tape(parts[0], parts[i]);
    const Shape& si = parts[i].shape();
    if (axis == 0) {
      if (si.cols != s.cols) throw DimensionError("concat rows: column mismatch");
      s.rows += si.rows;
    } else {
      if (si.rows != s.rows) throw DimensionError("concat cols: row mismatch");
      s.cols += si.cols;
    }
  }
  Tensor out(s);
  bool tracked = false;
  if (axis == 0) {
    std::size_t off = 0;
    for (const Var& p : parts) {
      const auto d = p.value().data();
      std::copy(d.begin(), d.end(), out.data().begin() + static_cast<long>(off));
      off += d.size();
      tracked = tracked || t->tracked(p);
    }
  } else {
    std::size_t col = 0;
    for (const Var& p : parts) {
      const Tensor& pv = p.value();
      for (std::size_t r = 0; r < s.rows; ++r)
        for (std::size_t c = 0; c < pv.cols(); ++c) out(r, col + c) = pv(r, c);
      col += pv.cols();
      tracked = tracked || t->tracked(p);
    }
  }
  Var v = t->push(Op::kConcat, std::move(out), tracked);
  auto& n = t->mutable_node(v.id());
  n.i0 = static_cast<std::size_t>(axis);
  for (const Var& p : parts) n.inputs.push_back(p.id());
  return v;
}

inline Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

/// Half-open range [begin, end) along `axis`.
inline Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  const std::size_t extent = axis == 0 ? s.rows : s.cols;
  if ((axis != 0 && axis != 1) || begin >= end || end > extent)
    throw DimensionError("slice [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") of " + to_string(s));
  const Tensor& av = a.value();
  Tensor out;
  if (axis == 0) {
    out = Tensor({end - begin, s.cols},
                 std::vector<double>(av.data().begin() + static_cast<long>(begin * s.cols),
                                     av.data().begin() + static_cast<long>(end * s.cols)));
  } else {
    out = Tensor({s.rows, end - begin});
    for (std::size_t r = 0; r < s.rows; ++r)
      for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = av(r, c);
  }
  Var v = detail::emit(a.tape(), Op::kSlice, std::move(out), "slice", a.id());
  auto& n = a.tape()->mutable_node(v.id());
  n.i0 = static_cast<std::size_t>(axis);
  n.i1 = begin;
  return v;
}

namespace detail {
template <class F>
inline Var unary(Var a, Op op, const char* name, F f) {
  Tensor out = a.value();
  for (double& x : out.data()) x = f(x);
  return emit(a.tape(), op, std::move(out), name, a.id());
}
}  // namespace detail

inline Var tanh(Var a) {
  return detail::unary(a, Op::kTanh, "tanh", [](double x) { return std::tanh(x); });
}
inline Var sigmoid(Var a) {
  return detail::unary(a, Op::kSigmoid, "sigmoid", [](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
  });
}
inline Var exp(Var a) {
  return detail::unary(a, Op::kExp, "exp", [](double x) { return std::exp(x); });
}
inline Var log(Var a) {
  return detail::unary(a, Op::kLog, "log", [](double x) { return std::log(x); });
}

namespace detail {

// Applies f(first, stride, count) to every softmax lane of `s` along `axis`.
template <class F>
inline void for_each_lane(const Shape& s, int axis, F f) {
  if (axis == 1) {
    for (std::size_t r = 0; r < s.rows; ++r) f(r * s.cols, std::size_t{1}, s.cols);
  } else {
    for (std::size_t c = 0; c < s.cols; ++c) f(c, s.cols, s.rows);
  }
}

inline Var softmax_like(Var a, int axis, bool log_domain) {
  if (axis != 0 && axis != 1) throw DimensionError("softmax axis must be 0 or 1");
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for_each_lane(av.shape(), axis, [&](std::size_t o, std::size_t st, std::size_t n) {
    double mx = av[o];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, av[o + i * st]);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += std::exp(av[o + i * st] - mx);
    const double lz = std::log(z);
    for (std::size_t i = 0; i < n; ++i) {
      const double l = av[o + i * st] - mx - lz;
      out[o + i * st] = log_domain ? l : std::exp(l);
    }
  });
  Var v = emit(a.tape(), log_domain ? Op::kLogSoftmax : Op::kSoftmax,
               std::move(out), log_domain ? "log_softmax" : "softmax", a.id());
  a.tape()->mutable_node(v.id()).i0 = static_cast<std::size_t>(axis);
  return v;
}

}  // namespace detail

inline Var softmax(Var a, int axis) { return detail::softmax_like(a, axis, false); }
inline Var log_softmax(Var a, int axis) {
  return detail::softmax_like(a, axis, true);
}

inline Var reduce_sum(Var a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  return detail::emit(a.tape(), Op::kReduceSum, Tensor::scalar(s), "reduce_sum",
                      a.id());
}

inline Var reduce_mean(Var a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  s /= static_cast<double>(a.value().size());
  return detail::emit(a.tape(), Op::kReduceMean, Tensor::scalar(s),
                      "reduce_mean", a.id());
}

inline Var reshape(Var a, Shape s) {
  if (s.size() != a.value().size())
    throw DimensionError("reshape " + to_string(a.shape()) + " -> " +
                         to_string(s));
  Tensor out(s, a.value().storage());
  return detail::emit(a.tape(), Op::kReshape, std::move(out), "reshape", a.id());
}

/// 1x1 element (r, c) of `a`.
inline Var pick(Var a, std::size_t r, std::size_t c) {
  const Shape& s = a.shape();
  if (r >= s.rows || c >= s.cols)
    throw DimensionError("pick (" + std::to_string(r) + "," + std::to_string(c) +
                         ") of " + to_string(s));
  Var v = detail::emit(a.tape(), Op::kPick, Tensor::scalar(a.value()(r, c)),
                       "pick", a.id());
  auto& n = a.tape()->mutable_node(v.id());
  n.i0 = r;
  n.i1 = c;
  return v;
}

/// Repeat a 1 x n row `times` times into a times x n matrix.
inline Var tile_rows(Var a, std::size_t times) {
  const Shape& s = a.shape();
  if (s.rows != 1) throw DimensionError("tile_rows needs a single row");
  Tensor out({times, s.cols});
  const auto src = a.value().data();
  for (std::size_t r = 0; r < times; ++r)
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<long>(r * s.cols));
  return detail::emit(a.tape(), Op::kTileRows, std::move(out), "tile_rows", a.id());
}

inline void Tape::propagate(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.tracked || n.grad.empty() || n.op == Op::kLeaf) return;
  const std::vector<double>& g = n.grad;
  const Tensor& y = n.value;

  auto input = [&](int in) -> std::pair<Node*, std::vector<double>*> {
    Node& m = nodes_[static_cast<std::size_t>(in)];
    if (!m.tracked) return {&m, nullptr};
    return {&m, &grad_buffer(in)};
  };

  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kMatMul: {
      auto [an, ag] = input(n.a);
      auto [bn, bg] = input(n.b);
      const std::size_t m = an->value.rows(), k = an->value.cols(),
                        p = bn->value.cols();
      if (ag) {  // dA = dC B^T
        const double* B = bn->value.data().data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < p; ++j) {
            const double gij = g[i * p + j];
            if (gij == 0.0) continue;
            for (std::size_t q = 0; q < k; ++q) (*ag)[i * k + q] += gij * B[q * p + j];
          }
      }
      if (bg) {  // dB = A^T dC
        const double* A = an->value.data().data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t q = 0; q < k; ++q) {
            const double aiq = A[i * k + q];
            if (aiq == 0.0) continue;
            double* row = bg->data() + q * p;
            const double* gi = g.data() + i * p;
            for (std::size_t j = 0; j < p; ++j) row[j] += aiq * gi[j];
          }
      }
      break;
    }
    case Op::kAdd:
    case Op::kSub: {
      auto [an, ag] = input(n.a);
      auto [bn, bg] = input(n.b);
      const double sign = n.op == Op::kSub ? -1.0 : 1.0;
      if (ag)
        for (std::size_t i = 0; i < g.size(); ++i) (*ag)[i] += g[i];
      if (bg)
        for (std::size_t i = 0; i < g.size(); ++i) (*bg)[i] += sign * g[i];
      break;
    }
    case Op::kMul: {
      auto [an, ag] = input(n.a);
      auto [bn, bg] = input(n.b);
      if (ag)
        for (std::size_t i = 0; i < g.size(); ++i) (*ag)[i] += g[i] * bn->value[i];
      if (bg)
        for (std::size_t i = 0; i < g.size(); ++i) (*bg)[i] += g[i] * an->value[i];
      break;
    }
    case Op::kAffine: {
      auto [an, ag] = input(n.a);
      if (ag)
        for (std::size_t i = 0; i < g.size(); ++i) (*ag)[i] += n.alpha * g[i];
      break;
    }
    case Op::kConcat: {
      std::size_t off = 0;
      for (int in : n.inputs) {
        auto [pn, pg] = input(in);
        const Shape& ps = pn->value.shape();
        if (n.i0 == 0) {
          if (pg)
            for (std::size_t i = 0; i < ps.size(); ++i) (*pg)[i] += g[off + i];
          off += ps.size();
        } else {
          if (pg)
            for (std::size_t r = 0; r < ps.rows; ++r)
              for (std::size_t c = 0; c < ps.cols; ++c)
                (*pg)[r * ps.cols + c] += g[r * y.cols() + off + c];
          off += ps.cols;
        }
      }
      break;
    }
    case Op::kSlice: {
      auto [an, ag] = input(n.a);
      if (!ag) break;
      const std::size_t cols = an->value.cols();
      if (n.i0 == 0) {
        for (std::size_t i = 0; i < g.size(); ++i) (*ag)[n.i1 * cols + i] += g[i];
      } else {
        for (std::size_t r = 0; r < y.rows(); ++r)
          for (std::size_t c = 0; c < y.cols(); ++c)
            (*ag)[r * cols + n.i1 + c] += g[r * y.cols() + c];
      }
      break;
    }
    case Op::kTanh: {
      auto [an, ag] = input(n.a);
      if (ag)
        for (std::size_t i = 0; i < g.size(); ++i)
          (*ag)[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    }
    case Op::kSigmoid: {
      auto [an, ag] = input(n.a);
      if (ag)
        for (std::size_t i = 0; i < g.size(); ++i)
          (*ag)[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case Op::kExp: {
      auto [an, ag] = input(n.a);
      if (ag)
        for (std::size_t i = 0; i < g.size(); ++i) (*ag)[i] += g[i] * y[i];
      break;
    }
    case Op::kLog: {
      auto [an, ag] = input(n.a);
      if (ag)
        for (std::size_t i = 0; i < g.size(); ++i) (*ag)[i] += g[i] / an->value[i];
      break;
    }
    case Op::kSoftmax: {
      // dx_i = y_i (g_i - sum_j y_j g_j), with g shifted by g_first so that a
      // constant upstream gradient yields an exact zero.
      std::vector<double>* ag = input(n.a).second;
      if (!ag) break;
      detail::for_each_lane(y.shape(), static_cast<int>(n.i0),
                            [&](std::size_t o, std::size_t st, std::size_t cnt) {
                              const double ref = g[o];
                              double dot = 0.0;
                              for (std::size_t i = 0; i < cnt; ++i)
                                dot += y[o + i * st] * (g[o + i * st] - ref);
                              for (std::size_t i = 0; i < cnt; ++i) {
                                const std::size_t k = o + i * st;
                                (*ag)[k] += y[k] * ((g[k] - ref) - dot);
                              }
                            });
      break;
    }
    case Op::kLogSoftmax: {
      std::vector<double>* ag = input(n.a).second;
      if (!ag) break;
      detail::for_each_lane(y.shape(), static_cast<int>(n.i0),
                            [&](std::size_t o, std::size_t st, std::size_t cnt) {
                              double total = 0.0;
                              for (std::size_t i = 0; i < cnt; ++i) total += g[o + i * st];
                              for (std::size_t i = 0; i < cnt; ++i) {
                                const std::size_t k = o + i * st;
                                (*ag)[k] += g[k] - std::exp(y[k]) * total;
                              }
                            });
      break;
    }
    case Op::kReduceSum:
    case Op::kReduceMean: {
      auto [an, ag] = input(n.a);
      if (!ag) break;
      const double d = n.op == Op::kReduceSum
                           ? g[0]
                           : g[0] / static_cast<double>(an->value.size());
      for (double& x : *ag) x += d;
      break;
    }
    case Op::kReshape: {
      auto [an, ag] = input(n.a);
      if (ag)
        for (std::size_t i = 0; i < g.size(); ++i) (*ag)[i] += g[i];
      break;
    }
    case Op::kPick: {
      auto [an, ag] = input(n.a);
      if (ag) (*ag)[n.i0 * an->value.cols() + n.i1] += g[0];
      break;
    }
    case Op::kTileRows: {
      auto [an, ag] = input(n.a);
      if (!ag) break;
      const std::size_t cols = y.cols();
      for (std::size_t r = 0; r < y.rows(); ++r)
        for (std::size_t c = 0; c < cols; ++c) (*ag)[c] += g[r * cols + c];
      break;
    }
  }
}

}  // namespace sambr::ad
