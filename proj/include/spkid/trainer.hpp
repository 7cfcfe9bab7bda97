// spkid/trainer.hpp

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

#ifndef SPKID_TRAINER_HPP_
#define SPKID_TRAINER_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spkid/embedding.hpp"
#include "spkid/identification.hpp"
#include "spkid/rmc.hpp"
#include "spkid/rng.hpp"
#include "spkid/sequence.hpp"

namespace spkid {

enum class OptimizerKind { kSgd, kAdam };

struct TrainingConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 10;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int seq_len_min = 2;  // smallest profile count per example
  int seq_len_max = 4;  // largest profile count per example
  int context = 1;
  std::uint64_t seed = 0;
  bool permute_augmentation = true;

  void validate(int n_max) const {
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("TrainingConfig: bad learning rate");
    if (batch_size < 1) throw std::invalid_argument("TrainingConfig: batch size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("TrainingConfig: negative epochs");
    if (seq_len_min < 2 || seq_len_max < seq_len_min || seq_len_max > n_max) {
      throw std::invalid_argument(
          "TrainingConfig: need 2 <= seq_len_min <= seq_len_max <= n_max");
    }
    if (context < 0) throw std::invalid_argument("TrainingConfig: negative context");
  }
};

// One contiguous stretch of windowed embeddings; context windows for an
// example are always drawn from within one utterance. An utterance is
// single-speaker by default; window_speakers, when non-empty, labels every
// window individually so a whole meeting can act as one utterance and
// examples near turn changes get context from the neighboring speaker,
// exactly as the identifier will see at inference time.
struct PoolUtterance {
  std::string speaker_id;
  std::vector<Embedding> windows;
  std::vector<std::string> window_speakers;

  const std::string& speaker_at(std::size_t w) const {
    return window_speakers.empty() ? speaker_id : window_speakers[w];
  }
};

struct ExamplePool {
  std::vector<PoolUtterance> utterances;
  std::vector<SpeakerProfile> profiles;

  int profile_index(const std::string& speaker_id) const {
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      if (profiles[i].speaker_id == speaker_id) return static_cast<int>(i);
    }
    return -1;
  }

  void validate() const {
    if (profiles.empty()) throw std::invalid_argument("ExamplePool: no profiles");
    for (const auto& u : utterances) {
      if (u.windows.empty()) throw std::invalid_argument("ExamplePool: empty utterance");
      if (!u.window_speakers.empty() && u.window_speakers.size() != u.windows.size()) {
        throw std::invalid_argument("ExamplePool: window_speakers length mismatch");
      }
      for (std::size_t w = 0; w < u.windows.size(); ++w) {
        if (profile_index(u.speaker_at(w)) < 0) {
          throw std::invalid_argument("ExamplePool: utterance speaker '" + u.speaker_at(w) +
                                      "' has no profile");
        }
      }
    }
  }
};

// Draws `count` training examples: a random labeled window with its
// utterance-internal context, the true speaker's profile, and a random set
// of distinct distractor profiles. The profile count is uniform in
// [seq_len_min, seq_len_max]; with augmentation on, the true profile lands
// at a uniformly random position, otherwise at position 0.
inline std::vector<IdentificationSequence> make_training_examples(const ExamplePool& pool,
                                                                  const TrainingConfig& cfg,
                                                                  int count, Rng& rng) {
  pool.validate();
  if (pool.utterances.empty()) throw std::invalid_argument("make_training_examples: empty pool");
  if (static_cast<int>(pool.profiles.size()) < cfg.seq_len_max) {
    throw std::invalid_argument("make_training_examples: fewer distinct speakers than seq_len_max");
  }
  // Flat index over all windows so each window is equally likely.
  std::vector<std::pair<int, int>> flat;  // (utterance, window)
  for (std::size_t u = 0; u < pool.utterances.size(); ++u) {
    for (std::size_t w = 0; w < pool.utterances[u].windows.size(); ++w) {
      flat.emplace_back(static_cast<int>(u), static_cast<int>(w));
    }
  }
  std::vector<IdentificationSequence> out;
  out.reserve(count);
  std::vector<int> others;
  others.reserve(pool.profiles.size());
  for (int n = 0; n < count; ++n) {
    const auto [ui, wi] = flat[rng.uniform_int(flat.size())];
    const PoolUtterance& utt = pool.utterances[ui];
    const int true_profile = pool.profile_index(utt.speaker_at(wi));

    const int n_prof = cfg.seq_len_min +
                       static_cast<int>(rng.uniform_int(
                           static_cast<std::uint64_t>(cfg.seq_len_max - cfg.seq_len_min + 1)));
    others.clear();
    for (std::size_t p = 0; p < pool.profiles.size(); ++p) {
      if (static_cast<int>(p) != true_profile) others.push_back(static_cast<int>(p));
    }
    rng.shuffle(others);

    std::vector<int> chosen(n_prof, true_profile);
    for (int k = 1; k < n_prof; ++k) chosen[k] = others[k - 1];
    int label = 0;
    if (cfg.permute_augmentation) {
      const auto perm = rng.permutation(n_prof);
      std::vector<int> placed(n_prof);
      for (int k = 0; k < n_prof; ++k) {
        placed[k] = chosen[perm[k]];
        if (perm[k] == 0) label = k;
      }
      chosen = placed;
    }
    std::vector<Embedding> profile_vecs;
    profile_vecs.reserve(n_prof);
    for (int idx : chosen) profile_vecs.push_back(pool.profiles[idx].vector);
    out.push_back(build_sequence(utt.windows, wi, cfg.context, profile_vecs, label));
  }
  return out;
}

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

using TrainingLog = std::vector<EpochStats>;

// Fraction of sequences whose decision matches the stored label.
inline double evaluate(const RmcModel& model, std::span<const IdentificationSequence> seqs) {
  if (seqs.empty()) throw std::invalid_argument("evaluate: empty sequence set");
  std::size_t correct = 0;
  for (const auto& seq : seqs) {
    if (seq.label < 0) throw std::invalid_argument("evaluate: unlabeled sequence");
    if (identify_rmc(model, seq).first == seq.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(seqs.size());
}

// Cosine baseline on the same sequences: the center window against the
// profile part, context ignored.
inline double evaluate_cosine(std::span<const IdentificationSequence> seqs) {
  if (seqs.empty()) throw std::invalid_argument("evaluate_cosine: empty sequence set");
  std::size_t correct = 0;
  for (const auto& seq : seqs) {
    if (seq.label < 0) throw std::invalid_argument("evaluate_cosine: unlabeled sequence");
    const int nw = seq.n_windows();
    const Embedding& x = seq.steps[nw / 2];  // center of the 2c+1 context windows
    int best = 0;
    double best_d = 0.0;
    for (int j = 0; j < seq.n_profiles; ++j) {
      const double d = cosine_distance(x, seq.steps[nw + j]);
      if (j == 0 || d < best_d) {
        best = j;
        best_d = d;
      }
    }
    if (best == seq.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(seqs.size());
}

// Mini-batch gradient descent over the example set. Shuffling, and thus the
// whole run, is a pure function of cfg.seed. Aborts on non-finite loss.
inline TrainingLog train(RmcModel& model, std::span<const IdentificationSequence> examples,
                         const TrainingConfig& cfg) {
  cfg.validate(model.config.n_max);
  if (examples.empty()) throw std::invalid_argument("train: no examples");

  // Adam moment buffers, congruent to the parameter list.
  std::vector<Eigen::MatrixXd> m1, m2;
  if (cfg.optimizer == OptimizerKind::kAdam) {
    for (const auto& [name, w] : model.params) {
      m1.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
      m2.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    }
  }
  std::int64_t adam_t = 0;

  TrainingLog log;
  std::vector<int> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::vector<IdentificationSequence> batch;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(Rng::derive(cfg.seed, 0x9e3779b9u + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      batch.clear();
      for (std::size_t i = b0; i < b1; ++i) batch.push_back(examples[order[i]]);
      auto [loss, grads] = loss_and_gradients(model, batch);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(b0 / cfg.batch_size) +
                                 " (diverged; lower the learning rate)");
      }
      loss_sum += loss * static_cast<double>(b1 - b0);
      seen += b1 - b0;

      if (cfg.optimizer == OptimizerKind::kSgd) {
        for (std::size_t t = 0; t < grads.size(); ++t) {
          model.params[t].second -= cfg.learning_rate * grads[t].second;
        }
      } else {
        ++adam_t;
        const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam_t));
        const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam_t));
        for (std::size_t t = 0; t < grads.size(); ++t) {
          const Eigen::MatrixXd& g = grads[t].second;
          m1[t] = cfg.adam_beta1 * m1[t] + (1.0 - cfg.adam_beta1) * g;
          m2[t] = cfg.adam_beta2 * m2[t] + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
          model.params[t].second.array() -=
              cfg.learning_rate * (m1[t].array() / c1) /
              ((m2[t].array() / c2).sqrt() + cfg.adam_eps);
        }
      }
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(seen);
    stats.accuracy = evaluate(model, examples);
    log.push_back(stats);
  }
  return log;
}

}  // namespace spkid

#endif  // SPKID_TRAINER_HPP_
