// spkid/identification.hpp

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

#ifndef SPKID_IDENTIFICATION_HPP_
#define SPKID_IDENTIFICATION_HPP_

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spkid/embedding.hpp"
#include "spkid/rmc.hpp"
#include "spkid/sequence.hpp"
#include "spkid/timeline.hpp"

namespace spkid {

// Nearest profile by cosine distance; ties go to the lowest index.
inline std::pair<int, Eigen::VectorXd> identify_cosine(const Embedding& x,
                                                       std::span<const SpeakerProfile> profiles) {
  if (profiles.empty()) throw std::invalid_argument("identify_cosine: no profiles");
  Eigen::VectorXd dist(profiles.size());
  int best = 0;
  for (std::size_t j = 0; j < profiles.size(); ++j) {
    dist(j) = cosine_distance(x, profiles[j].vector);
    if (dist(j) < dist(best)) best = static_cast<int>(j);
  }
  return {best, dist};
}

// Argmax over the first n_profiles posterior entries; positions past the
// sequence's profile count are ignored at decision time, ties go to the
// lowest index.
inline int decide_from_posterior(const Eigen::VectorXd& posterior, int n_profiles) {
  if (n_profiles < 1 || n_profiles > posterior.size()) {
    throw std::invalid_argument("decide_from_posterior: profile count out of range");
  }
  int best = 0;
  for (int j = 1; j < n_profiles; ++j) {
    if (posterior(j) > posterior(best)) best = j;
  }
  return best;
}

// Model decision for one sequence.
inline std::pair<int, Eigen::VectorXd> identify_rmc(const RmcModel& model,
                                                    const IdentificationSequence& seq) {
  if (seq.n_profiles > model.config.n_max) {
    throw std::invalid_argument("identify_rmc: more profiles than the model supports");
  }
  Eigen::VectorXd posterior = forward(model, seq);
  const int best = decide_from_posterior(posterior, seq.n_profiles);
  return {best, posterior};
}

// Labels every window of a meeting with the cosine baseline. Window spans
// give the trajectory its timestamps.
inline LabelTrajectory identify_meeting_cosine(std::span<const Embedding> windows,
                                               std::span<const WindowSpan> spans,
                                               std::span<const SpeakerProfile> profiles,
                                               const std::string& meeting_id = "") {
  if (windows.size() != spans.size()) {
    throw std::invalid_argument("identify_meeting: window/span count mismatch");
  }
  LabelTrajectory traj;
  traj.meeting_id = meeting_id;
  for (const auto& p : profiles) traj.speaker_ids.push_back(p.speaker_id);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    auto [label, dist] = identify_cosine(windows[i], profiles);
    traj.entries.push_back({spans[i].start, spans[i].end, label, std::move(dist)});
  }
  return traj;
}

// Labels every window with the trained model, building one sequence with
// temporal context c per window.
inline LabelTrajectory identify_meeting_rmc(const RmcModel& model,
                                            std::span<const Embedding> windows,
                                            std::span<const WindowSpan> spans,
                                            std::span<const SpeakerProfile> profiles,
                                            int context,
                                            const std::string& meeting_id = "") {
  if (windows.size() != spans.size()) {
    throw std::invalid_argument("identify_meeting: window/span count mismatch");
  }
  LabelTrajectory traj;
  traj.meeting_id = meeting_id;
  std::vector<Embedding> profile_vecs;
  for (const auto& p : profiles) {
    traj.speaker_ids.push_back(p.speaker_id);
    profile_vecs.push_back(p.vector);
  }
  for (std::size_t i = 0; i < windows.size(); ++i) {
    IdentificationSequence seq =
        build_sequence(windows, static_cast<int>(i), context, profile_vecs);
    auto [label, posterior] = identify_rmc(model, seq);
    traj.entries.push_back({spans[i].start, spans[i].end, label, std::move(posterior)});
  }
  return traj;
}

// Median filter over the integer label sequence, edge-replicated. The
// median of an odd count of integers is always one of them, but it can be a
// label that is not locally in the majority; see mode_smooth for the
// majority-vote alternative.
inline LabelTrajectory median_smooth(const LabelTrajectory& traj, int taps) {
  if (taps < 1 || taps % 2 == 0) {
    throw std::invalid_argument("median_smooth: taps must be odd and >= 1");
  }
  LabelTrajectory out = traj;
  const int n = static_cast<int>(traj.entries.size());
  if (n == 0 || taps == 1) return out;
  const int half = taps / 2;
  std::vector<int> window(taps);
  for (int i = 0; i < n; ++i) {
    for (int k = -half; k <= half; ++k) {
      const int j = std::clamp(i + k, 0, n - 1);
      window[k + half] = traj.entries[j].label;
    }
    std::nth_element(window.begin(), window.begin() + half, window.end());
    out.entries[i].label = window[half];
  }
  return out;
}

// Majority vote in the same centered window; ties go to the smallest label.
inline LabelTrajectory mode_smooth(const LabelTrajectory& traj, int taps) {
  if (taps < 1 || taps % 2 == 0) {
    throw std::invalid_argument("mode_smooth: taps must be odd and >= 1");
  }
  LabelTrajectory out = traj;
  const int n = static_cast<int>(traj.entries.size());
  if (n == 0 || taps == 1) return out;
  const int half = taps / 2;
  for (int i = 0; i < n; ++i) {
    std::vector<int> window;
    for (int k = -half; k <= half; ++k) {
      window.push_back(traj.entries[std::clamp(i + k, 0, n - 1)].label);
    }
    std::sort(window.begin(), window.end());
    int best = window[0], best_count = 0;
    for (std::size_t a = 0; a < window.size();) {
      std::size_t b = a;
      while (b < window.size() && window[b] == window[a]) ++b;
      if (static_cast<int>(b - a) > best_count) {
        best_count = static_cast<int>(b - a);
        best = window[a];
      }
      a = b;
    }
    out.entries[i].label = best;
  }
  return out;
}

}  // namespace spkid

#endif  // SPKID_IDENTIFICATION_HPP_
