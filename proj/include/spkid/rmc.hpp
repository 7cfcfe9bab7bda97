// spkid/rmc.hpp

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

// Relational memory cell: a QxP memory matrix updated by multi-head
// self-attention over the memory rows plus the incoming embedding, with
// LSTM-style per-slot input/forget gating. An ordinary LSTM cell of the
// same output width is provided as an ablation drop-in, and a small MLP
// head turns the final cell output into speaker-position logits.

#ifndef SPKID_RMC_HPP_
#define SPKID_RMC_HPP_

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "spkid/autodiff.hpp"
#include "spkid/embedding.hpp"
#include "spkid/rng.hpp"
#include "spkid/sequence.hpp"

namespace spkid {

enum class CellKind { kRmc, kLstm };

struct RmcConfig {
  int n_max = 4;               // maximum number of profiles per sequence
  int input_dim = 0;           // embedding dimension entering the cell
  int slot_width = 64;         // P, width of one memory slot
  int heads = 2;               // H, attention heads (must divide slot_width)
  int memory_slots = 0;        // Q; 0 means the default n_max + 1
  int attention_mlp_width = 64;
  int mlp_head_layers = 4;
  int mlp_head_width = 256;
  std::uint64_t seed = 0;

  int slots() const { return memory_slots > 0 ? memory_slots : n_max + 1; }
  int head_dim() const { return slot_width / heads; }
  int output_dim() const { return slots() * slot_width; }

  void validate() const {
    if (n_max < 2) throw std::invalid_argument("RmcConfig: n_max must be >= 2");
    if (input_dim < 1) throw std::invalid_argument("RmcConfig: input_dim must be positive");
    if (slot_width < 1 || heads < 1 || slot_width % heads != 0) {
      throw std::invalid_argument("RmcConfig: slot_width must be a positive multiple of heads");
    }
    if (memory_slots < 0) throw std::invalid_argument("RmcConfig: negative memory_slots");
    if (attention_mlp_width < 1 || mlp_head_layers < 1 || mlp_head_width < 1) {
      throw std::invalid_argument("RmcConfig: widths must be positive");
    }
  }
};

// Cell state for both kinds; the RMC uses `memory`, the LSTM variant uses
// `hidden` and `cell` (each 1 x Q*P).
struct CellState {
  Eigen::MatrixXd memory;
  Eigen::MatrixXd hidden;
  Eigen::MatrixXd cell;
};

// Row i of the initial memory is the standard basis vector e_i, truncated or
// zero-padded to the slot width. Deterministic and input-independent.
inline Eigen::MatrixXd init_memory(const RmcConfig& cfg) {
  cfg.validate();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(cfg.slots(), cfg.slot_width);
  for (int i = 0; i < cfg.slots() && i < cfg.slot_width; ++i) m(i, i) = 1.0;
  return m;
}

// Model parameters as an ordered, named tensor list. The order is fixed by
// construction and is the serialization and initialization order.
struct RmcModel {
  RmcConfig config;
  CellKind kind = CellKind::kRmc;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> params;

  Eigen::MatrixXd& param(std::string_view name) {
    for (auto& [n, w] : params) {
      if (n == name) return w;
    }
    throw std::invalid_argument("RmcModel: no parameter named " + std::string(name));
  }
  const Eigen::MatrixXd& param(std::string_view name) const {
    return const_cast<RmcModel*>(this)->param(name);
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, w] : params) n += static_cast<std::size_t>(w.size());
    return n;
  }
};

inline CellState init_state(const RmcModel& model) {
  CellState s;
  if (model.kind == CellKind::kRmc) {
    s.memory = init_memory(model.config);
  } else {
    s.hidden = Eigen::MatrixXd::Zero(1, model.config.output_dim());
    s.cell = Eigen::MatrixXd::Zero(1, model.config.output_dim());
  }
  return s;
}

inline RmcModel make_model(const RmcConfig& cfg, CellKind kind = CellKind::kRmc) {
  cfg.validate();
  RmcModel m;
  m.config = cfg;
  m.kind = kind;
  const int P = cfg.slot_width;
  const int QP = cfg.output_dim();
  auto add = [&m](const std::string& name, int rows, int cols) {
    m.params.emplace_back(name, Eigen::MatrixXd::Zero(rows, cols));
  };

  add("input_proj.w", cfg.input_dim, P);
  add("input_proj.b", 1, P);
  if (kind == CellKind::kRmc) {
    add("attn.ln.g", 1, P);
    add("attn.ln.b", 1, P);
    for (int h = 0; h < cfg.heads; ++h) {
      const std::string base = "attn.h" + std::to_string(h);
      add(base + ".wq", P, cfg.head_dim());
      add(base + ".wk", P, cfg.head_dim());
      add(base + ".wv", P, cfg.head_dim());
    }
    add("mlp.ln.g", 1, P);
    add("mlp.ln.b", 1, P);
    add("mlp.w1", P, cfg.attention_mlp_width);
    add("mlp.b1", 1, cfg.attention_mlp_width);
    add("mlp.w2", cfg.attention_mlp_width, P);
    add("mlp.b2", 1, P);
    for (const char* gate : {"gate.in", "gate.f"}) {
      add(std::string(gate) + ".wx", P, 1);
      add(std::string(gate) + ".wm", P, 1);
      add(std::string(gate) + ".b", 1, 1);
    }
  } else {
    add("lstm.w", P + QP, 4 * QP);
    add("lstm.b", 1, 4 * QP);
  }
  int in_w = QP;
  for (int l = 0; l < cfg.mlp_head_layers; ++l) {
    const std::string base = "head." + std::to_string(l);
    add(base + ".w", in_w, cfg.mlp_head_width);
    add(base + ".b", 1, cfg.mlp_head_width);
    in_w = cfg.mlp_head_width;
  }
  add("head.out.w", in_w, cfg.n_max);
  add("head.out.b", 1, cfg.n_max);

  // Initialization. Each tensor gets its own derived stream so the values
  // do not depend on how other tensors are sized.
  int index = 0;
  for (auto& [name, w] : m.params) {
    Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(index++)));
    const bool is_bias = name.ends_with(".b") || name.ends_with(".b1") ||
                         name.ends_with(".b2");
    if (name.ends_with(".ln.g")) {
      w.setOnes();
    } else if (name == "gate.f.b") {
      // Forget gate starts open so early training does not erase memory.
      w.setConstant(1.0);
    } else if (name == "lstm.b") {
      w.setZero();
      w.block(0, QP, 1, QP).setConstant(1.0);  // forget-gate block
    } else if (is_bias || name.ends_with(".ln.b")) {
      w.setZero();
    } else if (name == "head.out.w") {
      // Near-zero logits at initialization: a fresh model starts at the
      // uniform distribution, so the first loss is ln(n_max).
      for (int i = 0; i < w.rows(); ++i) {
        for (int j = 0; j < w.cols(); ++j) w(i, j) = 1e-3 * rng.normal();
      }
    } else {
      const bool relu_fan = name.starts_with("head.") || name == "mlp.w1";
      const double std = relu_fan ? std::sqrt(2.0 / static_cast<double>(w.rows()))
                                  : 1.0 / std::sqrt(static_cast<double>(w.rows()));
      for (int i = 0; i < w.rows(); ++i) {
        for (int j = 0; j < w.cols(); ++j) w(i, j) = std * rng.normal();
      }
    }
  }
  return m;
}

// ---- Taped forward pass ----

// Model parameters bound onto a tape as leaves, so gradients land in
// registry order.
struct TapedParams {
  const RmcModel* model = nullptr;
  std::vector<ad::Var> vars;

  ad::Var operator[](std::string_view name) const {
    for (std::size_t i = 0; i < model->params.size(); ++i) {
      if (model->params[i].first == name) return vars[i];
    }
    throw std::invalid_argument("TapedParams: no parameter named " + std::string(name));
  }
};

inline TapedParams bind_params(ad::Tape& tape, const RmcModel& model) {
  TapedParams tp;
  tp.model = &model;
  tp.vars.reserve(model.params.size());
  for (const auto& [name, w] : model.params) tp.vars.push_back(tape.leaf(w));
  return tp;
}

namespace detail {

inline ad::Var affine(const ad::Var& x, const ad::Var& w, const ad::Var& b) {
  return ad::add_rowvec(ad::matmul(x, w), b);
}

// Multi-head self-attention update: every memory row attends over the
// memory rows plus the projected input row; the concatenated head outputs
// are added residually to M. Optionally reports the attention weights.
inline ad::Var attend_taped(const TapedParams& tp, const ad::Var& M, const ad::Var& x,
                            std::vector<Eigen::MatrixXd>* attention_out = nullptr) {
  const RmcConfig& cfg = tp.model->config;
  const int Q = static_cast<int>(M.value().rows());
  ad::Var mx = ad::vstack(M, x);
  ad::Var ln = ad::layer_norm_rows(mx, tp["attn.ln.g"], tp["attn.ln.b"]);
  ad::Var ln_m = ad::slice_rows(ln, 0, Q);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));
  ad::Var heads;
  for (int h = 0; h < cfg.heads; ++h) {
    const std::string base = "attn.h" + std::to_string(h);
    ad::Var q = ad::matmul(ln_m, tp[base + ".wq"]);
    ad::Var k = ad::matmul(ln, tp[base + ".wk"]);
    ad::Var v = ad::matmul(ln, tp[base + ".wv"]);
    ad::Var scores = ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_d);
    ad::Var attn = ad::softmax_rows(scores);
    if (attention_out) attention_out->push_back(attn.value());
    ad::Var out = ad::matmul(attn, v);
    heads = h == 0 ? out : ad::hstack(heads, out);
  }
  return ad::add(M, heads);
}

struct StateVars {
  ad::Var memory;  // RMC
  ad::Var hidden;  // LSTM
  ad::Var cell;    // LSTM
};

inline StateVars bind_state(ad::Tape& tape, const RmcModel& model, const CellState& s) {
  StateVars sv;
  if (model.kind == CellKind::kRmc) {
    sv.memory = tape.leaf(s.memory);
  } else {
    sv.hidden = tape.leaf(s.hidden);
    sv.cell = tape.leaf(s.cell);
  }
  return sv;
}

// One recurrent step on raw (unprojected) input; returns the new state and
// the flattened output row of width Q*P.
inline std::pair<StateVars, ad::Var> step_taped(const TapedParams& tp, const StateVars& state,
                                                const ad::Var& x_raw) {
  const RmcConfig& cfg = tp.model->config;
  if (x_raw.value().cols() != cfg.input_dim || x_raw.value().rows() != 1) {
    throw std::invalid_argument("rmc step: input row has wrong dimension");
  }
  ad::Var x = affine(x_raw, tp["input_proj.w"], tp["input_proj.b"]);

  if (tp.model->kind == CellKind::kLstm) {
    const int QP = cfg.output_dim();
    ad::Var z = ad::hstack(x, state.hidden);
    ad::Var pre = affine(z, tp["lstm.w"], tp["lstm.b"]);
    ad::Var gi = ad::sigmoid(ad::slice_cols(pre, 0, QP));
    ad::Var gf = ad::sigmoid(ad::slice_cols(pre, QP, QP));
    ad::Var gc = ad::tanh_op(ad::slice_cols(pre, 2 * QP, QP));
    ad::Var go = ad::sigmoid(ad::slice_cols(pre, 3 * QP, QP));
    StateVars next;
    next.cell = ad::add(ad::cmul(gf, state.cell), ad::cmul(gi, gc));
    next.hidden = ad::cmul(go, ad::tanh_op(next.cell));
    return {next, next.hidden};
  }

  const ad::Var& M = state.memory;
  ad::Var m_att = attend_taped(tp, M, x);
  ad::Var m_mlp = affine(ad::relu(affine(ad::layer_norm_rows(m_att, tp["mlp.ln.g"], tp["mlp.ln.b"]),
                                         tp["mlp.w1"], tp["mlp.b1"])),
                         tp["mlp.w2"], tp["mlp.b2"]);
  ad::Var m_hat = ad::add(m_att, m_mlp);

  // Per-slot scalar gates: sigma(x.w_x + M_i.w_m + b), one value per row.
  auto gate = [&tp, &x, &M](const char* base) {
    const std::string b(base);
    ad::Var from_x = ad::add(ad::matmul(x, tp[b + ".wx"]), tp[b + ".b"]);
    return ad::sigmoid(ad::add_scalar(ad::matmul(M, tp[b + ".wm"]), from_x));
  };
  ad::Var g_in = gate("gate.in");
  ad::Var g_f = gate("gate.f");
  StateVars next;
  next.memory = ad::add(ad::mul_colvec(M, g_f), ad::mul_colvec(ad::tanh_op(m_hat), g_in));
  return {next, ad::flatten_rows(next.memory)};
}

inline ad::Var head_logits(const TapedParams& tp, ad::Var y) {
  const RmcConfig& cfg = tp.model->config;
  for (int l = 0; l < cfg.mlp_head_layers; ++l) {
    const std::string base = "head." + std::to_string(l);
    y = ad::relu(affine(y, tp[base + ".w"], tp[base + ".b"]));
  }
  return affine(y, tp["head.out.w"], tp["head.out.b"]);
}

// Full sequence to 1 x n_max logits. Throws on non-finite intermediates
// rather than letting NaNs propagate silently.
inline ad::Var logits_taped(ad::Tape& tape, const TapedParams& tp,
                            const IdentificationSequence& seq) {
  const RmcConfig& cfg = tp.model->config;
  if (seq.steps.empty()) throw std::invalid_argument("forward: empty sequence");
  if (seq.n_profiles < 1 || seq.n_profiles > cfg.n_max) {
    throw std::invalid_argument("forward: profile count outside [1, n_max]");
  }
  StateVars state = bind_state(tape, *tp.model, init_state(*tp.model));
  ad::Var out;
  for (std::size_t i = 0; i < seq.steps.size(); ++i) {
    if (seq.steps[i].size() != cfg.input_dim) {
      throw std::invalid_argument("forward: sequence element dimension mismatch");
    }
    ad::Var x = tape.leaf(seq.steps[i].transpose());
    auto [next, o] = step_taped(tp, state, x);
    if (!o.value().allFinite()) {
      throw std::runtime_error("forward: non-finite cell output at step " +
                               std::to_string(i));
    }
    state = next;
    out = o;
  }
  ad::Var logits = head_logits(tp, out);
  if (!logits.value().allFinite()) {
    throw std::runtime_error("forward: non-finite logits");
  }
  return logits;
}

inline Eigen::RowVectorXd softmax_row_values(const Eigen::RowVectorXd& z) {
  const double m = z.maxCoeff();
  Eigen::RowVectorXd p = (z.array() - m).exp().matrix();
  return p / p.sum();
}

}  // namespace detail

// ---- Plain-matrix entry points ----

// Attention update alone (no MLP or gating): used by tests and diagnostics.
inline Eigen::MatrixXd attend(const RmcModel& model, const Eigen::MatrixXd& memory,
                              const Eigen::RowVectorXd& x_projected,
                              std::vector<Eigen::MatrixXd>* attention_out = nullptr) {
  if (model.kind != CellKind::kRmc) throw std::invalid_argument("attend: not an RMC model");
  if (memory.cols() != model.config.slot_width || x_projected.cols() != model.config.slot_width) {
    throw std::invalid_argument("attend: width mismatch");
  }
  ad::Tape tape(false);
  TapedParams tp = bind_params(tape, model);
  ad::Var M = tape.leaf(memory);
  ad::Var x = tape.leaf(x_projected);
  return detail::attend_taped(tp, M, x, attention_out).value();
}

// One cell step (either kind) on a raw embedding.
inline std::pair<CellState, Eigen::VectorXd> cell_step(const RmcModel& model,
                                                       const CellState& state,
                                                       const Embedding& x_raw) {
  ad::Tape tape(false);
  TapedParams tp = bind_params(tape, model);
  detail::StateVars sv = detail::bind_state(tape, model, state);
  ad::Var x = tape.leaf(x_raw.transpose());
  auto [next, out] = detail::step_taped(tp, sv, x);
  if (!out.value().allFinite()) throw std::runtime_error("cell_step: non-finite output");
  CellState ns;
  if (model.kind == CellKind::kRmc) {
    ns.memory = next.memory.value();
  } else {
    ns.hidden = next.hidden.value();
    ns.cell = next.cell.value();
  }
  return {ns, out.value().row(0).transpose()};
}

inline std::pair<CellState, Eigen::VectorXd> rmc_step(const RmcModel& model,
                                                      const CellState& state,
                                                      const Embedding& x_raw) {
  if (model.kind != CellKind::kRmc) throw std::invalid_argument("rmc_step: not an RMC model");
  return cell_step(model, state, x_raw);
}

inline std::pair<CellState, Eigen::VectorXd> lstm_step(const RmcModel& model,
                                                       const CellState& state,
                                                       const Embedding& x_raw) {
  if (model.kind != CellKind::kLstm) throw std::invalid_argument("lstm_step: not an LSTM model");
  return cell_step(model, state, x_raw);
}

// Posterior over the n_max profile positions for one sequence.
inline Eigen::VectorXd forward(const RmcModel& model, const IdentificationSequence& seq) {
  ad::Tape tape(false);
  TapedParams tp = bind_params(tape, model);
  ad::Var logits = detail::logits_taped(tape, tp, seq);
  return detail::softmax_row_values(logits.value().row(0)).transpose();
}

// Named gradient tensors, congruent to RmcModel::params.
using GradientList = std::vector<std::pair<std::string, Eigen::MatrixXd>>;

// Mean cross-entropy over the batch plus gradients for every parameter.
// Batch members are processed in order on separate tapes; gradients are
// summed in that fixed order, so results are reproducible.
inline std::pair<double, GradientList> loss_and_gradients(
    const RmcModel& model, std::span<const IdentificationSequence> batch) {
  if (batch.empty()) throw std::invalid_argument("loss_and_gradients: empty batch");
  GradientList grads;
  grads.reserve(model.params.size());
  for (const auto& [name, w] : model.params) {
    grads.emplace_back(name, Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  double loss_sum = 0.0;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& seq : batch) {
    if (seq.label < 0 || seq.label >= model.config.n_max) {
      throw std::invalid_argument("loss_and_gradients: label outside [0, n_max)");
    }
    ad::Tape tape(true);
    TapedParams tp = bind_params(tape, model);
    ad::Var logits = detail::logits_taped(tape, tp, seq);
    ad::Var loss = ad::cross_entropy_logits(logits, seq.label);
    loss_sum += loss.value()(0, 0);
    tape.backward(loss);
    for (std::size_t i = 0; i < tp.vars.size(); ++i) {
      const Eigen::MatrixXd* g = tape.maybe_grad(tp.vars[i].id());
      if (g) grads[i].second += inv_n * *g;
    }
  }
  return {loss_sum * inv_n, grads};
}

inline double loss_value(const RmcModel& model, const IdentificationSequence& seq) {
  if (seq.label < 0 || seq.label >= model.config.n_max) {
    throw std::invalid_argument("loss_value: label outside [0, n_max)");
  }
  ad::Tape tape(false);
  TapedParams tp = bind_params(tape, model);
  ad::Var logits = detail::logits_taped(tape, tp, seq);
  const auto& z = logits.value();
  const double m = z.row(0).maxCoeff();
  const double lse = m + std::log((z.row(0).array() - m).exp().sum());
  return lse - z(0, seq.label);
}

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> tensors;  // one entry per parameter tensor
  double max_rel_err = 0.0;
};

// Central-difference check of every parameter entry against the analytic
// gradient. Relative error uses max(|analytic|, |numeric|, 1e-6) as the
// denominator so near-zero gradients are compared absolutely.
inline GradCheckReport check_gradients(const RmcModel& model,
                                       const IdentificationSequence& seq,
                                       double step = 1e-5) {
  if (seq.label < 0) throw std::invalid_argument("check_gradients: sequence must be labeled");
  auto [loss, grads] = loss_and_gradients(
      model, std::span<const IdentificationSequence>(&seq, 1));
  (void)loss;
  RmcModel probe = model;
  GradCheckReport report;
  for (std::size_t ti = 0; ti < probe.params.size(); ++ti) {
    Eigen::MatrixXd& w = probe.params[ti].second;
    GradCheckEntry entry;
    entry.name = probe.params[ti].first;
    for (int i = 0; i < w.rows(); ++i) {
      for (int j = 0; j < w.cols(); ++j) {
        const double saved = w(i, j);
        w(i, j) = saved + step;
        const double up = loss_value(probe, seq);
        w(i, j) = saved - step;
        const double down = loss_value(probe, seq);
        w(i, j) = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double analytic = grads[ti].second(i, j);
        const double denom =
            std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        entry.max_rel_err = std::max(entry.max_rel_err, std::abs(analytic - numeric) / denom);
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.tensors.push_back(std::move(entry));
  }
  return report;
}

}  // namespace spkid

#endif  // SPKID_RMC_HPP_
