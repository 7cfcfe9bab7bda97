// spkid/autodiff.hpp

// Copyright 2024  spkid authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Small reverse-mode automatic differentiation engine over dense Eigen
// matrices. A Tape records one forward computation; backward() replays the
// recorded operations in reverse, accumulating gradients. Everything is
// double precision and single-threaded, so results are bit-reproducible.

#ifndef SPKID_AUTODIFF_HPP_
#define SPKID_AUTODIFF_HPP_

#include <cmath>
#include <deque>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace spkid {
namespace ad {

class Tape;

// A handle to one node on a tape. Cheap to copy; only valid while the tape
// that produced it is alive and not reset.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Eigen::MatrixXd& value() const;
  // Gradient after backward(); zero matrix if this node never received one.
  Eigen::MatrixXd grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  // recording=false gives a value-only tape: operations compute forward
  // results but record no backward closures (used for cheap re-evaluation,
  // e.g. finite differences).
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  Var leaf(Eigen::MatrixXd value) {
    nodes_.push_back(Node{std::move(value), Eigen::MatrixXd()});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  const Eigen::MatrixXd& value(int id) const { return nodes_[id].value; }

  // Gradient accumulation. A node whose gradient was never touched stays
  // empty, which backward closures treat as zero (and skip).
  template <typename Expr>
  void accum(int id, const Expr& delta) {
    Eigen::MatrixXd& g = nodes_[id].grad;
    if (g.size() == 0) {
      g = delta;
    } else {
      g += delta;
    }
  }

  const Eigen::MatrixXd* maybe_grad(int id) const {
    return nodes_[id].grad.size() == 0 ? nullptr : &nodes_[id].grad;
  }

  void record(std::function<void(Tape&)> fn) {
    if (recording_) ops_.push_back(std::move(fn));
  }

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  void backward(const Var& loss) {
    if (!recording_) throw std::logic_error("backward() on a non-recording tape");
    if (loss.tape() != this) throw std::invalid_argument("backward(): foreign Var");
    if (value(loss.id()).size() != 1) {
      throw std::invalid_argument("backward(): loss must be a 1x1 scalar");
    }
    accum(loss.id(), Eigen::MatrixXd::Ones(1, 1));
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)(*this);
  }

  // Frees all nodes and closures; existing Vars become invalid.
  void reset() {
    nodes_.clear();
    ops_.clear();
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
  };
  // A deque keeps references from value() stable while new nodes are
  // appended; operations hold such references across leaf() calls.
  std::deque<Node> nodes_;
  std::vector<std::function<void(Tape&)>> ops_;
  bool recording_;
};

inline const Eigen::MatrixXd& Var::value() const { return tape_->value(id_); }

inline Eigen::MatrixXd Var::grad() const {
  const Eigen::MatrixXd* g = tape_->maybe_grad(id_);
  if (g) return *g;
  const Eigen::MatrixXd& v = value();
  return Eigen::MatrixXd::Zero(v.rows(), v.cols());
}

namespace detail {

inline Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw std::invalid_argument("autodiff: operands live on different tapes");
  }
  return *a.tape();
}

}  // namespace detail

// ---- Elementwise and affine building blocks ----

inline Var add(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  if (a.value().rows() != b.value().rows() || a.value().cols() != b.value().cols()) {
    throw std::invalid_argument("add: shape mismatch");
  }
  Var out = t.leaf(a.value() + b.value());
  t.record([ai = a.id(), bi = b.id(), oi = out.id()](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    t.accum(ai, *g);
    t.accum(bi, *g);
  });
  return out;
}

inline Var scale(const Var& a, double s) {
  Tape& t = *a.tape();
  Var out = t.leaf(a.value() * s);
  t.record([ai = a.id(), oi = out.id(), s](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    t.accum(ai, *g * s);
  });
  return out;
}

// Elementwise (Hadamard) product.
inline Var cmul(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  if (a.value().rows() != b.value().rows() || a.value().cols() != b.value().cols()) {
    throw std::invalid_argument("cmul: shape mismatch");
  }
  Var out = t.leaf(a.value().cwiseProduct(b.value()));
  t.record([ai = a.id(), bi = b.id(), oi = out.id()](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    t.accum(ai, g->cwiseProduct(t.value(bi)));
    t.accum(bi, g->cwiseProduct(t.value(ai)));
  });
  return out;
}

inline Var matmul(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  if (a.value().cols() != b.value().rows()) {
    throw std::invalid_argument("matmul: inner dimension mismatch");
  }
  Var out = t.leaf(a.value() * b.value());
  t.record([ai = a.id(), bi = b.id(), oi = out.id()](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    t.accum(ai, *g * t.value(bi).transpose());
    t.accum(bi, t.value(ai).transpose() * *g);
  });
  return out;
}

inline Var transpose(const Var& a) {
  Tape& t = *a.tape();
  Var out = t.leaf(a.value().transpose());
  t.record([ai = a.id(), oi = out.id()](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    t.accum(ai, g->transpose());
  });
  return out;
}

// Adds a 1xK row vector to every row of an NxK matrix (bias broadcast).
inline Var add_rowvec(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  if (b.value().rows() != 1 || a.value().cols() != b.value().cols()) {
    throw std::invalid_argument("add_rowvec: expected 1xK bias matching a's columns");
  }
  Eigen::MatrixXd v = a.value();
  v.rowwise() += b.value().row(0);
  Var out = t.leaf(std::move(v));
  t.record([ai = a.id(), bi = b.id(), oi = out.id()](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    t.accum(ai, *g);
    t.accum(bi, g->colwise().sum());
  });
  return out;
}

// Adds a 1x1 scalar node to every entry.
inline Var add_scalar(const Var& a, const Var& s) {
  Tape& t = detail::same_tape(a, s);
  if (s.value().size() != 1) throw std::invalid_argument("add_scalar: scalar must be 1x1");
  Var out = t.leaf((a.value().array() + s.value()(0, 0)).matrix());
  t.record([ai = a.id(), si = s.id(), oi = out.id()](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    t.accum(ai, *g);
    t.accum(si, Eigen::MatrixXd::Constant(1, 1, g->sum()));
  });
  return out;
}

// Scales row i of a QxP matrix by v(i) (v is Qx1): per-slot gate application.
inline Var mul_colvec(const Var& a, const Var& v) {
  Tape& t = detail::same_tape(a, v);
  if (v.value().cols() != 1 || v.value().rows() != a.value().rows()) {
    throw std::invalid_argument("mul_colvec: expected Qx1 vector matching a's rows");
  }
  Var out = t.leaf(v.value().col(0).asDiagonal() * a.value());
  t.record([ai = a.id(), vi = v.id(), oi = out.id()](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    t.accum(ai, t.value(vi).col(0).asDiagonal() * *g);
    t.accum(vi, g->cwiseProduct(t.value(ai)).rowwise().sum());
  });
  return out;
}

// ---- Structural ops ----

inline Var vstack(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  if (a.value().cols() != b.value().cols()) {
    throw std::invalid_argument("vstack: column count mismatch");
  }
  Eigen::MatrixXd v(a.value().rows() + b.value().rows(), a.value().cols());
  v << a.value(), b.value();
  Var out = t.leaf(std::move(v));
  t.record([ai = a.id(), bi = b.id(), oi = out.id(),
            ra = a.value().rows()](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    t.accum(ai, g->topRows(ra));
    t.accum(bi, g->bottomRows(g->rows() - ra));
  });
  return out;
}

inline Var hstack(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  if (a.value().rows() != b.value().rows()) {
    throw std::invalid_argument("hstack: row count mismatch");
  }
  Eigen::MatrixXd v(a.value().rows(), a.value().cols() + b.value().cols());
  v << a.value(), b.value();
  Var out = t.leaf(std::move(v));
  t.record([ai = a.id(), bi = b.id(), oi = out.id(),
            ca = a.value().cols()](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    t.accum(ai, g->leftCols(ca));
    t.accum(bi, g->rightCols(g->cols() - ca));
  });
  return out;
}

inline Var slice_rows(const Var& a, int r0, int n) {
  Tape& t = *a.tape();
  if (r0 < 0 || n <= 0 || r0 + n > a.value().rows()) {
    throw std::invalid_argument("slice_rows: range out of bounds");
  }
  Var out = t.leaf(a.value().middleRows(r0, n));
  t.record([ai = a.id(), oi = out.id(), r0, n](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    const auto& av = t.value(ai);
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(av.rows(), av.cols());
    full.middleRows(r0, n) = *g;
    t.accum(ai, full);
  });
  return out;
}

inline Var slice_cols(const Var& a, int c0, int n) {
  Tape& t = *a.tape();
  if (c0 < 0 || n <= 0 || c0 + n > a.value().cols()) {
    throw std::invalid_argument("slice_cols: range out of bounds");
  }
  Var out = t.leaf(a.value().middleCols(c0, n));
  t.record([ai = a.id(), oi = out.id(), c0, n](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    const auto& av = t.value(ai);
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(av.rows(), av.cols());
    full.middleCols(c0, n) = *g;
    t.accum(ai, full);
  });
  return out;
}

// Flattens an RxC matrix into a 1x(R*C) row vector in row-major order.
inline Var flatten_rows(const Var& a) {
  Tape& t = *a.tape();
  const auto& av = a.value();
  Eigen::MatrixXd v(1, av.size());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    for (Eigen::Index j = 0; j < av.cols(); ++j) {
      v(0, i * av.cols() + j) = av(i, j);
    }
  }
  Var out = t.leaf(std::move(v));
  t.record([ai = a.id(), oi = out.id(), r = av.rows(), c = av.cols()](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    Eigen::MatrixXd full(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) {
        full(i, j) = (*g)(0, i * c + j);
      }
    }
    t.accum(ai, full);
  });
  return out;
}

// ---- Nonlinearities ----

inline Var sigmoid(const Var& a) {
  Tape& t = *a.tape();
  // 1/(1+exp(-x)) evaluated via the numerically safe branch split.
  Eigen::MatrixXd v = a.value().unaryExpr([](double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  Var out = t.leaf(std::move(v));
  t.record([ai = a.id(), oi = out.id()](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    const auto& y = t.value(oi);
    t.accum(ai, g->cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
  return out;
}

inline Var tanh_op(const Var& a) {
  Tape& t = *a.tape();
  Var out = t.leaf(a.value().array().tanh().matrix());
  t.record([ai = a.id(), oi = out.id()](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    const auto& y = t.value(oi);
    t.accum(ai, g->cwiseProduct((1.0 - y.array().square()).matrix()));
  });
  return out;
}

inline Var relu(const Var& a) {
  Tape& t = *a.tape();
  Var out = t.leaf(a.value().cwiseMax(0.0));
  t.record([ai = a.id(), oi = out.id()](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    const Eigen::MatrixXd mask = (t.value(ai).array() > 0.0).cast<double>().matrix();
    t.accum(ai, g->cwiseProduct(mask));
  });
  return out;
}

// Row-wise softmax with the usual max subtraction for stability.
inline Var softmax_rows(const Var& a) {
  Tape& t = *a.tape();
  Eigen::MatrixXd v = a.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double m = v.row(i).maxCoeff();
    v.row(i) = (v.row(i).array() - m).exp().matrix();
    v.row(i) /= v.row(i).sum();
  }
  Var out = t.leaf(std::move(v));
  t.record([ai = a.id(), oi = out.id()](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    const auto& p = t.value(oi);
    // dz = p .* (g - rowsum(g .* p))
    Eigen::MatrixXd gp = g->cwiseProduct(p);
    Eigen::VectorXd rowsum = gp.rowwise().sum();
    Eigen::MatrixXd dz = p.cwiseProduct((*g).colwise() - rowsum);
    t.accum(ai, dz);
  });
  return out;
}

// Row-wise layer normalization with learned 1xP gain and bias, applied to
// every row independently: y = gain .* (x - mean)/sqrt(var + eps) + bias.
// Variance is the population variance over the row.
inline constexpr double kLayerNormEps = 1e-5;

inline Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias) {
  Tape& t = detail::same_tape(a, gain);
  detail::same_tape(a, bias);
  const auto& av = a.value();
  const Eigen::Index P = av.cols();
  if (gain.value().rows() != 1 || gain.value().cols() != P || bias.value().rows() != 1 ||
      bias.value().cols() != P) {
    throw std::invalid_argument("layer_norm_rows: gain/bias must be 1xP");
  }
  Eigen::MatrixXd xhat(av.rows(), P);
  Eigen::VectorXd inv_std(av.rows());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    const double mu = av.row(i).mean();
    const double var = (av.row(i).array() - mu).square().sum() / static_cast<double>(P);
    inv_std(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = (av.row(i).array() - mu) * inv_std(i);
  }
  Eigen::MatrixXd y = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  y.rowwise() += bias.value().row(0);
  Var out = t.leaf(std::move(y));
  t.record([ai = a.id(), gi = gain.id(), bi = bias.id(), oi = out.id(),
            xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    const Eigen::Index P = xhat.cols();
    t.accum(bi, g->colwise().sum());
    t.accum(gi, g->cwiseProduct(xhat).colwise().sum());
    // dxhat = g .* gain; dx = inv_std * (dxhat - mean(dxhat) - xhat*mean(dxhat.*xhat))
    Eigen::MatrixXd dxhat =
        (g->array().rowwise() * t.value(gi).row(0).array()).matrix();
    Eigen::MatrixXd dx(xhat.rows(), P);
    for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
      const double m1 = dxhat.row(i).mean();
      const double m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
      dx.row(i) =
          (inv_std(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2)).matrix();
    }
    t.accum(ai, dx);
  });
  return out;
}

// Cross-entropy of a 1xK logit row against an integer label, fused with
// log-sum-exp for stability. Returns a 1x1 scalar node.
inline Var cross_entropy_logits(const Var& logits, int label) {
  Tape& t = *logits.tape();
  const auto& z = logits.value();
  if (z.rows() != 1) throw std::invalid_argument("cross_entropy_logits: logits must be 1xK");
  if (label < 0 || label >= z.cols()) {
    throw std::invalid_argument("cross_entropy_logits: label out of range");
  }
  const double m = z.row(0).maxCoeff();
  const double lse = m + std::log((z.row(0).array() - m).exp().sum());
  Var out = t.leaf(Eigen::MatrixXd::Constant(1, 1, lse - z(0, label)));
  t.record([zi = logits.id(), oi = out.id(), label, lse](Tape& t) {
    const auto* g = t.maybe_grad(oi);
    if (!g) return;
    const auto& z = t.value(zi);
    Eigen::MatrixXd dz = (z.row(0).array() - lse).exp().matrix();
    dz(0, label) -= 1.0;
    t.accum(zi, (*g)(0, 0) * dz);
  });
  return out;
}

// Softmax probabilities of a 1xK logit row (forward-only helper shape-wise,
// but fully differentiable like the rest).
inline Var softmax_row(const Var& logits) { return softmax_rows(logits); }

}  // namespace ad
}  // namespace spkid

#endif  // SPKID_AUTODIFF_HPP_
