// spkid/sequence.hpp

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

#ifndef SPKID_SEQUENCE_HPP_
#define SPKID_SEQUENCE_HPP_

#include <span>
#include <stdexcept>
#include <vector>

#include "spkid/embedding.hpp"
#include "spkid/rng.hpp"

namespace spkid {

// One classification instance: the window to identify, surrounded by its
// temporal context, followed by the candidate speaker profiles. The model
// reads the steps in order and must answer with the profile position.
struct IdentificationSequence {
  std::vector<Embedding> steps;  // [context windows..., profiles...]
  int n_profiles = 0;
  int label = -1;  // profile position of the true speaker; -1 when unknown

  int n_windows() const { return static_cast<int>(steps.size()) - n_profiles; }
};

// Assembles the sequence for window `center` of a meeting: the windows
// center-c .. center+c followed by all profiles. Positions past a meeting
// edge are clamped to the edge, so the first and last windows see their own
// embedding repeated instead of a shorter sequence.
inline IdentificationSequence build_sequence(std::span<const Embedding> windows,
                                             int center, int context,
                                             std::span<const Embedding> profiles,
                                             int label = -1) {
  if (windows.empty()) throw std::invalid_argument("build_sequence: no windows");
  if (profiles.empty()) throw std::invalid_argument("build_sequence: no profiles");
  if (center < 0 || center >= static_cast<int>(windows.size())) {
    throw std::invalid_argument("build_sequence: center window out of range");
  }
  if (context < 0) throw std::invalid_argument("build_sequence: negative context");
  if (label >= static_cast<int>(profiles.size())) {
    throw std::invalid_argument("build_sequence: label out of range");
  }
  IdentificationSequence seq;
  seq.n_profiles = static_cast<int>(profiles.size());
  seq.label = label;
  const int last = static_cast<int>(windows.size()) - 1;
  for (int j = center - context; j <= center + context; ++j) {
    const int jj = j < 0 ? 0 : (j > last ? last : j);
    seq.steps.push_back(windows[jj]);
  }
  for (const auto& p : profiles) seq.steps.push_back(p);
  return seq;
}

// Reorders the profile part of a sequence by `perm` (perm[k] = old position
// now appearing at position k) and remaps the label accordingly.
inline IdentificationSequence permute_profiles(const IdentificationSequence& seq,
                                               std::span<const int> perm) {
  if (static_cast<int>(perm.size()) != seq.n_profiles) {
    throw std::invalid_argument("permute_profiles: permutation size mismatch");
  }
  IdentificationSequence out;
  out.n_profiles = seq.n_profiles;
  out.label = -1;
  const int nw = seq.n_windows();
  out.steps.assign(seq.steps.begin(), seq.steps.begin() + nw);
  std::vector<bool> seen(perm.size(), false);
  for (int k = 0; k < seq.n_profiles; ++k) {
    const int old = perm[k];
    if (old < 0 || old >= seq.n_profiles || seen[old]) {
      throw std::invalid_argument("permute_profiles: not a permutation");
    }
    seen[old] = true;
    out.steps.push_back(seq.steps[nw + old]);
    if (seq.label == old) out.label = k;
  }
  if (seq.label >= 0 && out.label < 0) {
    throw std::logic_error("permute_profiles: label lost");
  }
  return out;
}

// Random profile shuffle used as training augmentation.
inline IdentificationSequence shuffle_profiles(const IdentificationSequence& seq,
                                               Rng& rng) {
  const auto perm = rng.permutation(seq.n_profiles);
  return permute_profiles(seq, perm);
}

}  // namespace spkid

#endif  // SPKID_SEQUENCE_HPP_
