// spkid/embedding.hpp

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

#ifndef SPKID_EMBEDDING_HPP_
#define SPKID_EMBEDDING_HPP_

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace spkid {

// One analysis window of speech in embedding space.
using Embedding = Eigen::VectorXd;

// Enrolled identity vector; expected to be length-normalized.
struct SpeakerProfile {
  std::string speaker_id;
  Embedding vector;
};

inline Embedding length_normalize(const Embedding& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("degenerate embedding: zero or non-finite norm");
  }
  return v / n;
}

inline Embedding mean_normalize(const Embedding& v, const Eigen::VectorXd& mean) {
  if (v.size() != mean.size()) {
    throw std::invalid_argument("mean_normalize: dimension mismatch (" +
                                std::to_string(v.size()) + " vs " +
                                std::to_string(mean.size()) + ")");
  }
  return v - mean;
}

// 1 - cos angle; range [0, 2].
inline double cosine_distance(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine_distance: dimension mismatch");
  }
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw std::invalid_argument("cosine_distance: zero vector");
  }
  return 1.0 - a.dot(b) / (na * nb);
}

// Per-speaker mean of the given windows, re-length-normalized. Windows are
// expected to already live in the processed (projected, normalized) space.
inline SpeakerProfile estimate_profile(const std::string& speaker_id,
                                       std::span<const Embedding> windows) {
  if (windows.empty()) {
    throw std::invalid_argument("estimate_profile: empty window list");
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(windows[0].size());
  for (const auto& w : windows) {
    if (w.size() != mean.size()) {
      throw std::invalid_argument("estimate_profile: dimension mismatch");
    }
    mean += w;
  }
  mean /= static_cast<double>(windows.size());
  if (!(mean.norm() > 0.0)) {
    throw std::invalid_argument("estimate_profile: mean has zero norm");
  }
  return SpeakerProfile{speaker_id, length_normalize(mean)};
}

inline SpeakerProfile estimate_profile(const std::string& speaker_id,
                                       const std::vector<Embedding>& windows) {
  return estimate_profile(speaker_id, std::span<const Embedding>(windows));
}

}  // namespace spkid

#endif  // SPKID_EMBEDDING_HPP_
