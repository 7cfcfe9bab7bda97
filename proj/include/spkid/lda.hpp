// spkid/lda.hpp

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

#ifndef SPKID_LDA_HPP_
#define SPKID_LDA_HPP_

#include <algorithm>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "spkid/embedding.hpp"

namespace spkid {

// Supervised linear back-end: subtract the global mean, project with the
// LDA matrix, then length-normalize (see apply_projection).
struct ProjectionModel {
  Eigen::VectorXd mean;   // d_in
  Eigen::MatrixXd lda;    // d_out x d_in
  int d_in = 0;
  int d_out = 0;
};

namespace detail {

// Flip each row so its largest-magnitude entry is positive. Eigenvector
// signs are otherwise solver-dependent.
inline void fix_row_signs(Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index imax = 0;
    m.row(r).cwiseAbs().maxCoeff(&imax);
    if (m(r, imax) < 0.0) m.row(r) = -m.row(r);
  }
}

}  // namespace detail

// Fits the discriminant projection on labeled embeddings. Directions beyond
// the Fisher rank (#classes - 1) are filled with principal directions of the
// whitened total scatter, so d_out may be as large as d_in even with few
// classes. Within-class scatter is shrunk by eps = 1e-4 * trace(S_W)/d_in.
inline ProjectionModel fit_lda(
    std::span<const std::pair<Embedding, std::string>> samples, int d_out) {
  if (samples.empty()) throw std::invalid_argument("fit_lda: no samples");
  const int d_in = static_cast<int>(samples[0].first.size());
  if (d_out < 1 || d_out > d_in) {
    throw std::invalid_argument("fit_lda: d_out out of range [1, d_in]");
  }

  // Classes with fewer than two samples carry no within-class information
  // and are dropped.
  std::map<std::string, std::vector<const Embedding*>> by_class;
  for (const auto& [emb, spk] : samples) {
    if (emb.size() != d_in) throw std::invalid_argument("fit_lda: dimension mismatch");
    by_class[spk].push_back(&emb);
  }
  for (auto it = by_class.begin(); it != by_class.end();) {
    it = it->second.size() < 2 ? by_class.erase(it) : std::next(it);
  }
  const int n_classes = static_cast<int>(by_class.size());
  if (n_classes < 2) {
    throw std::invalid_argument("fit_lda: need at least two classes with >=2 samples each");
  }

  Eigen::VectorXd global_mean = Eigen::VectorXd::Zero(d_in);
  std::size_t n_total = 0;
  for (const auto& [spk, rows] : by_class) {
    for (const auto* e : rows) global_mean += *e;
    n_total += rows.size();
  }
  global_mean /= static_cast<double>(n_total);

  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(d_in, d_in);
  Eigen::MatrixXd sb = Eigen::MatrixXd::Zero(d_in, d_in);
  for (const auto& [spk, rows] : by_class) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d_in);
    for (const auto* e : rows) mu += *e;
    mu /= static_cast<double>(rows.size());
    for (const auto* e : rows) {
      const Eigen::VectorXd c = *e - mu;
      sw.noalias() += c * c.transpose();
    }
    const Eigen::VectorXd b = mu - global_mean;
    sb.noalias() += static_cast<double>(rows.size()) * b * b.transpose();
  }

  const double tr = sw.trace();
  if (!(tr > 0.0)) {
    throw std::runtime_error("fit_lda: singular within-class scatter (zero trace)");
  }
  const double eps = 1e-4 * tr / static_cast<double>(d_in);
  sw.diagonal().array() += eps;

  // Whiten by S_W^{-1/2}; the generalized problem S_B w = lambda S_W w then
  // becomes an ordinary symmetric one.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sw_eig(sw);
  if (sw_eig.info() != Eigen::Success || sw_eig.eigenvalues().minCoeff() <= 0.0) {
    throw std::runtime_error("fit_lda: singular within-class scatter after regularization");
  }
  const Eigen::MatrixXd whiten = sw_eig.eigenvectors() *
      sw_eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
      sw_eig.eigenvectors().transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sb_eig(whiten * sb * whiten);
  if (sb_eig.info() != Eigen::Success) throw std::runtime_error("fit_lda: eigensolver failed");

  const int n_fisher = std::min(d_out, n_classes - 1);
  Eigen::MatrixXd dirs(d_in, d_out);  // whitened-space directions, one per column
  for (int j = 0; j < n_fisher; ++j) {
    dirs.col(j) = sb_eig.eigenvectors().col(d_in - 1 - j);  // descending eigenvalue
  }

  if (n_fisher < d_out) {
    // Remaining directions: principal axes of the whitened total scatter,
    // restricted to the orthogonal complement of the Fisher directions.
    const Eigen::MatrixXd u = dirs.leftCols(n_fisher);
    const Eigen::MatrixXd proj =
        Eigen::MatrixXd::Identity(d_in, d_in) - u * u.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pca(
        proj * (whiten * (sw + sb) * whiten) * proj);
    if (pca.info() != Eigen::Success) throw std::runtime_error("fit_lda: eigensolver failed");
    for (int j = n_fisher; j < d_out; ++j) {
      dirs.col(j) = pca.eigenvectors().col(d_in - 1 - (j - n_fisher));
    }
  }

  ProjectionModel model;
  model.mean = global_mean;
  model.lda = (whiten * dirs).transpose();  // rows act on (x - mean)
  model.d_in = d_in;
  model.d_out = d_out;
  detail::fix_row_signs(model.lda);
  return model;
}

inline ProjectionModel fit_lda(
    const std::vector<std::pair<Embedding, std::string>>& samples, int d_out) {
  return fit_lda(std::span<const std::pair<Embedding, std::string>>(samples), d_out);
}

// mean-subtract -> LDA -> length-normalize.
inline Embedding apply_projection(const ProjectionModel& p, const Embedding& v) {
  if (v.size() != p.d_in) {
    throw std::invalid_argument("apply_projection: dimension mismatch");
  }
  const Eigen::VectorXd y = p.lda * (v - p.mean);
  if (!(y.norm() > 0.0)) {
    throw std::invalid_argument("apply_projection: projected vector has zero norm");
  }
  return length_normalize(y);
}

}  // namespace spkid

#endif  // SPKID_LDA_HPP_
