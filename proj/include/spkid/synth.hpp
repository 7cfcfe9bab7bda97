// spkid/synth.hpp

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

// Synthetic corpora: speakers are unit mean directions with Gaussian spread,
// meetings are scripted turn sequences with silences, and an optional fixed
// linear channel distorts the windowed embeddings (never the enrollment
// material). Everything is a pure function of its parameters and seed.

#ifndef SPKID_SYNTH_HPP_
#define SPKID_SYNTH_HPP_

#include <cstdio>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "spkid/embedding.hpp"
#include "spkid/rng.hpp"
#include "spkid/timeline.hpp"
#include "spkid/trainer.hpp"

namespace spkid {

struct SpeakerModel {
  std::string speaker_id;
  Embedding mean;   // unit norm
  double sigma = 0.0;
};

struct ChannelModel {
  Eigen::MatrixXd matrix;  // d x d, condition number bounded by construction
  double noise_sigma = 0.0;
};

struct MeetingParams {
  int n_turns = 20;
  double turn_min = 1.5;      // seconds, log-uniform range
  double turn_max = 12.0;
  double silence_min = 0.05;  // log-uniform needs a positive floor
  double silence_max = 1.5;
  int enroll_draws = 10;      // clean samples per profile
};

inline std::vector<SpeakerModel> make_roster(int n_speakers, int dim, double sigma,
                                             const std::string& id_prefix, Rng& rng) {
  if (n_speakers < 1 || dim < 2) throw std::invalid_argument("make_roster: bad sizes");
  if (sigma < 0.0) throw std::invalid_argument("make_roster: negative sigma");
  std::vector<SpeakerModel> roster;
  roster.reserve(n_speakers);
  char buf[32];
  for (int i = 0; i < n_speakers; ++i) {
    std::snprintf(buf, sizeof(buf), "%s%04d", id_prefix.c_str(), i);
    SpeakerModel spk;
    spk.speaker_id = buf;
    spk.mean = length_normalize(rng.gaussian_vector(dim));
    spk.sigma = sigma;
    roster.push_back(std::move(spk));
  }
  return roster;
}

// A fixed random perturbation of the identity, I + strength*G/sqrt(d), with
// singular values clamped so the condition number never exceeds 100.
inline ChannelModel make_channel(int dim, double strength, double noise_sigma, Rng& rng) {
  if (dim < 2) throw std::invalid_argument("make_channel: dim too small");
  if (strength < 0.0 || noise_sigma < 0.0) {
    throw std::invalid_argument("make_channel: negative strength or noise");
  }
  Eigen::MatrixXd g(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) g(i, j) = rng.normal();
  }
  Eigen::MatrixXd a =
      Eigen::MatrixXd::Identity(dim, dim) + (strength / std::sqrt(double(dim))) * g;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::VectorXd s = svd.singularValues();
  const double floor = s(0) / 100.0;
  for (int i = 0; i < s.size(); ++i) s(i) = std::max(s(i), floor);
  ChannelModel ch;
  ch.matrix = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  ch.noise_sigma = noise_sigma;
  return ch;
}

inline Embedding sample_speaker_embedding(const SpeakerModel& spk, Rng& rng) {
  if (spk.sigma == 0.0) return spk.mean;
  for (int attempt = 0; attempt < 2; ++attempt) {
    Embedding e = spk.mean + spk.sigma * rng.gaussian_vector(spk.mean.size());
    if (e.norm() > 1e-12) return length_normalize(e);
  }
  throw std::runtime_error("sample_speaker_embedding: degenerate draw twice in a row");
}

inline Embedding apply_channel(const ChannelModel& ch, const Embedding& e, Rng& rng) {
  if (ch.matrix.cols() != e.size()) throw std::invalid_argument("apply_channel: dim mismatch");
  Embedding out = ch.matrix * e;
  if (ch.noise_sigma > 0.0) out += ch.noise_sigma * rng.gaussian_vector(e.size());
  return length_normalize(out);
}

inline SpeakerProfile enroll_profile(const SpeakerModel& spk, int draws, Rng& rng) {
  if (draws < 1) throw std::invalid_argument("enroll_profile: need at least one draw");
  std::vector<Embedding> samples;
  samples.reserve(draws);
  for (int i = 0; i < draws; ++i) samples.push_back(sample_speaker_embedding(spk, rng));
  return estimate_profile(spk.speaker_id, samples);
}

struct GeneratedMeeting {
  Timeline reference;
  std::vector<WindowSpan> spans;
  std::vector<Embedding> windows;     // channel-distorted when a channel is set
  std::vector<SpeakerProfile> profiles;  // always from clean enrollment draws
};

// Scripts a meeting between all roster members: turn and silence durations
// are log-uniform, consecutive turns never share a speaker. Windows are cut
// with window_segments and each gets an embedding drawn from its segment's
// speaker (distorted by the channel when present); profiles come from
// separate clean draws.
inline GeneratedMeeting generate_meeting(std::span<const SpeakerModel> roster,
                                         const MeetingParams& params, double win,
                                         double shift, const ChannelModel* channel,
                                         Rng& rng, const std::string& meeting_id = "meeting") {
  if (roster.size() < 2) throw std::invalid_argument("generate_meeting: roster too small");
  if (params.n_turns < 1 || !(params.turn_min > 0.0) || params.turn_max < params.turn_min ||
      !(params.silence_min > 0.0) || params.silence_max < params.silence_min) {
    throw std::invalid_argument("generate_meeting: invalid script parameters");
  }
  GeneratedMeeting out;
  out.reference.meeting_id = meeting_id;

  double t = 0.0;
  int prev = -1;
  for (int turn = 0; turn < params.n_turns; ++turn) {
    int spk = static_cast<int>(rng.uniform_int(roster.size()));
    while (spk == prev) spk = static_cast<int>(rng.uniform_int(roster.size()));
    prev = spk;
    const double dur = rng.log_uniform(params.turn_min, params.turn_max);
    out.reference.segments.push_back({t, t + dur, roster[spk].speaker_id});
    t += dur + rng.log_uniform(params.silence_min, params.silence_max);
  }

  out.spans = window_segments(out.reference, win, shift);
  out.windows.reserve(out.spans.size());
  for (const auto& span : out.spans) {
    const std::string& speaker = out.reference.segments[span.segment_index].speaker;
    const SpeakerModel* model = nullptr;
    for (const auto& spk : roster) {
      if (spk.speaker_id == speaker) {
        model = &spk;
        break;
      }
    }
    Embedding e = sample_speaker_embedding(*model, rng);
    if (channel) e = apply_channel(*channel, e, rng);
    out.windows.push_back(std::move(e));
  }

  for (const auto& spk : roster) {
    out.profiles.push_back(enroll_profile(spk, params.enroll_draws, rng));
  }
  return out;
}

// Labeled single-speaker utterances plus clean profiles for every roster
// member: the training-side counterpart of generate_meeting.
inline ExamplePool generate_pool_from_roster(std::span<const SpeakerModel> roster,
                                             int utterances_per_speaker,
                                             int windows_per_utterance, int enroll_draws,
                                             const ChannelModel* channel, Rng& rng) {
  if (utterances_per_speaker < 1 || windows_per_utterance < 1) {
    throw std::invalid_argument("generate_pool: counts must be positive");
  }
  ExamplePool pool;
  for (const auto& spk : roster) {
    pool.profiles.push_back(enroll_profile(spk, enroll_draws, rng));
    for (int u = 0; u < utterances_per_speaker; ++u) {
      PoolUtterance utt;
      utt.speaker_id = spk.speaker_id;
      utt.windows.reserve(windows_per_utterance);
      for (int w = 0; w < windows_per_utterance; ++w) {
        Embedding e = sample_speaker_embedding(spk, rng);
        if (channel) e = apply_channel(*channel, e, rng);
        utt.windows.push_back(std::move(e));
      }
      pool.utterances.push_back(std::move(utt));
    }
  }
  pool.validate();
  return pool;
}

// Whole scripted meetings as labeled window streams, plus one clean profile
// per roster member. Training examples drawn from such a pool see speaker
// changes inside their temporal context at the same rate the identifier
// meets them, which single-speaker utterance pools never produce.
inline ExamplePool generate_meeting_pool(std::span<const SpeakerModel> roster,
                                         int n_meetings, int party_size,
                                         const MeetingParams& params, double win,
                                         double shift, const ChannelModel* channel,
                                         Rng& rng) {
  if (n_meetings < 1 || party_size < 2 ||
      party_size > static_cast<int>(roster.size())) {
    throw std::invalid_argument("generate_meeting_pool: bad meeting counts");
  }
  ExamplePool pool;
  for (const auto& spk : roster) {
    pool.profiles.push_back(enroll_profile(spk, params.enroll_draws, rng));
  }
  std::vector<int> order(roster.size());
  std::iota(order.begin(), order.end(), 0);
  for (int m = 0; m < n_meetings; ++m) {
    rng.shuffle(order);
    std::vector<SpeakerModel> party;
    party.reserve(party_size);
    for (int k = 0; k < party_size; ++k) party.push_back(roster[order[k]]);
    const auto meeting = generate_meeting(party, params, win, shift, channel, rng,
                                          "pool-meeting-" + std::to_string(m));
    PoolUtterance utt;
    utt.speaker_id = meeting.reference.meeting_id;
    utt.windows = meeting.windows;
    utt.window_speakers.reserve(meeting.spans.size());
    for (const auto& span : meeting.spans) {
      utt.window_speakers.push_back(meeting.reference.segments[span.segment_index].speaker);
    }
    pool.utterances.push_back(std::move(utt));
  }
  pool.validate();
  return pool;
}

inline ExamplePool generate_pool(int n_speakers, int dim, double sigma,
                                 int utterances_per_speaker, int windows_per_utterance,
                                 int enroll_draws, const ChannelModel* channel, Rng& rng,
                                 const std::string& id_prefix = "s") {
  const auto roster = make_roster(n_speakers, dim, sigma, id_prefix, rng);
  return generate_pool_from_roster(roster, utterances_per_speaker, windows_per_utterance,
                                   enroll_draws, channel, rng);
}

}  // namespace spkid

#endif  // SPKID_SYNTH_HPP_
