// spkid/checkpoint.hpp

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

// Model checkpoints and projection-model files. Parameters are stored as
// raw 64-bit floats (row-major), so save -> load -> forward is bit-exact.

#ifndef SPKID_CHECKPOINT_HPP_
#define SPKID_CHECKPOINT_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "spkid/io_bytes.hpp"
#include "spkid/lda.hpp"
#include "spkid/rmc.hpp"

namespace spkid {

inline constexpr char kCheckpointMagic[4] = {'X', 'C', 'K', 'P'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

// The snapshot string travels with the model for provenance (the tools put
// the resolved training configuration there); the loader returns it as-is.
inline void write_checkpoint(std::ostream& os, const RmcModel& model,
                             const std::string& training_snapshot = "") {
  io::write_bytes(os, kCheckpointMagic, 4);
  io::write_u16(os, kCheckpointVersion);
  io::write_uint<std::uint8_t>(os, model.kind == CellKind::kRmc ? 0 : 1);
  const RmcConfig& c = model.config;
  io::write_u32(os, static_cast<std::uint32_t>(c.n_max));
  io::write_u32(os, static_cast<std::uint32_t>(c.input_dim));
  io::write_u32(os, static_cast<std::uint32_t>(c.slot_width));
  io::write_u32(os, static_cast<std::uint32_t>(c.heads));
  io::write_u32(os, static_cast<std::uint32_t>(c.memory_slots));
  io::write_u32(os, static_cast<std::uint32_t>(c.attention_mlp_width));
  io::write_u32(os, static_cast<std::uint32_t>(c.mlp_head_layers));
  io::write_u32(os, static_cast<std::uint32_t>(c.mlp_head_width));
  io::write_u64(os, c.seed);
  if (training_snapshot.size() > 0xffffffffull) {
    throw std::invalid_argument("write_checkpoint: snapshot too large");
  }
  io::write_u32(os, static_cast<std::uint32_t>(training_snapshot.size()));
  io::write_bytes(os, training_snapshot.data(), training_snapshot.size());
  io::write_u32(os, static_cast<std::uint32_t>(model.params.size()));
  for (const auto& [name, w] : model.params) {
    io::write_string(os, name);
    io::write_u32(os, static_cast<std::uint32_t>(w.rows()));
    io::write_u32(os, static_cast<std::uint32_t>(w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) io::write_f64(os, w(i, j));
    }
  }
  if (!os) throw std::runtime_error("write_checkpoint: stream write failed");
}

struct LoadedCheckpoint {
  RmcModel model;
  std::string training_snapshot;
};

inline LoadedCheckpoint read_checkpoint(std::istream& is) {
  char magic[4];
  io::read_bytes(is, magic, 4, "checkpoint magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw std::runtime_error("read_checkpoint: bad magic, not a checkpoint");
  }
  const std::uint16_t version = io::read_u16(is, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw std::runtime_error("read_checkpoint: unsupported version " +
                             std::to_string(version));
  }
  const std::uint8_t kind_byte = io::read_uint<std::uint8_t>(is, "cell kind");
  if (kind_byte > 1) throw std::runtime_error("read_checkpoint: unknown cell kind");
  RmcConfig c;
  c.n_max = static_cast<int>(io::read_u32(is, "n_max"));
  c.input_dim = static_cast<int>(io::read_u32(is, "input_dim"));
  c.slot_width = static_cast<int>(io::read_u32(is, "slot_width"));
  c.heads = static_cast<int>(io::read_u32(is, "heads"));
  c.memory_slots = static_cast<int>(io::read_u32(is, "memory_slots"));
  c.attention_mlp_width = static_cast<int>(io::read_u32(is, "attention_mlp_width"));
  c.mlp_head_layers = static_cast<int>(io::read_u32(is, "mlp_head_layers"));
  c.mlp_head_width = static_cast<int>(io::read_u32(is, "mlp_head_width"));
  c.seed = io::read_u64(is, "seed");

  LoadedCheckpoint out;
  const std::uint32_t snap_len = io::read_u32(is, "snapshot length");
  out.training_snapshot.resize(snap_len);
  if (snap_len > 0) io::read_bytes(is, out.training_snapshot.data(), snap_len, "snapshot");

  // Build the registry from the config, then overwrite every tensor; any
  // name or shape difference is a hard error, not a silent partial load.
  out.model = make_model(c, kind_byte == 0 ? CellKind::kRmc : CellKind::kLstm);
  const std::uint32_t n_tensors = io::read_u32(is, "tensor count");
  if (n_tensors != out.model.params.size()) {
    throw std::runtime_error("read_checkpoint: tensor count mismatch for this config");
  }
  for (std::uint32_t t = 0; t < n_tensors; ++t) {
    const std::string name = io::read_string(is, "tensor name");
    const std::uint32_t rows = io::read_u32(is, "tensor rows");
    const std::uint32_t cols = io::read_u32(is, "tensor cols");
    Eigen::MatrixXd& w = out.model.param(name);
    if (w.rows() != static_cast<Eigen::Index>(rows) ||
        w.cols() != static_cast<Eigen::Index>(cols)) {
      throw std::runtime_error("read_checkpoint: shape mismatch for tensor " + name);
    }
    for (std::uint32_t i = 0; i < rows; ++i) {
      for (std::uint32_t j = 0; j < cols; ++j) w(i, j) = io::read_f64(is, "tensor values");
    }
  }
  return out;
}

inline void save_checkpoint(const std::string& path, const RmcModel& model,
                            const std::string& training_snapshot = "") {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  write_checkpoint(os, model, training_snapshot);
}

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  return read_checkpoint(is);
}

// ---- Projection model (mean + LDA matrix) ----

inline constexpr char kProjectionMagic[4] = {'X', 'P', 'R', 'J'};
inline constexpr std::uint16_t kProjectionVersion = 1;

inline void write_projection(std::ostream& os, const ProjectionModel& p) {
  io::write_bytes(os, kProjectionMagic, 4);
  io::write_u16(os, kProjectionVersion);
  io::write_u32(os, static_cast<std::uint32_t>(p.d_in));
  io::write_u32(os, static_cast<std::uint32_t>(p.d_out));
  for (int i = 0; i < p.d_in; ++i) io::write_f64(os, p.mean(i));
  for (int i = 0; i < p.d_out; ++i) {
    for (int j = 0; j < p.d_in; ++j) io::write_f64(os, p.lda(i, j));
  }
  if (!os) throw std::runtime_error("write_projection: stream write failed");
}

inline ProjectionModel read_projection(std::istream& is) {
  char magic[4];
  io::read_bytes(is, magic, 4, "projection magic");
  if (std::memcmp(magic, kProjectionMagic, 4) != 0) {
    throw std::runtime_error("read_projection: bad magic, not a projection model");
  }
  const std::uint16_t version = io::read_u16(is, "projection version");
  if (version != kProjectionVersion) {
    throw std::runtime_error("read_projection: unsupported version " +
                             std::to_string(version));
  }
  ProjectionModel p;
  p.d_in = static_cast<int>(io::read_u32(is, "projection d_in"));
  p.d_out = static_cast<int>(io::read_u32(is, "projection d_out"));
  if (p.d_in < 1 || p.d_out < 1 || p.d_out > p.d_in) {
    throw std::runtime_error("read_projection: invalid dimensions");
  }
  p.mean.resize(p.d_in);
  for (int i = 0; i < p.d_in; ++i) p.mean(i) = io::read_f64(is, "projection mean");
  p.lda.resize(p.d_out, p.d_in);
  for (int i = 0; i < p.d_out; ++i) {
    for (int j = 0; j < p.d_in; ++j) p.lda(i, j) = io::read_f64(is, "projection matrix");
  }
  return p;
}

inline void save_projection(const std::string& path, const ProjectionModel& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_projection: cannot open " + path);
  write_projection(os, p);
}

inline ProjectionModel load_projection(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_projection: cannot open " + path);
  return read_projection(is);
}

}  // namespace spkid

#endif  // SPKID_CHECKPOINT_HPP_
