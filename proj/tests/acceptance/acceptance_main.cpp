// tests/acceptance/acceptance_main.cpp

// Copyright 2024  spkid authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

// End-to-end checks of the library's headline behaviors, one numbered
// claim per function. Run as `acceptance <n>` for a single claim or with
// no argument for all of them; every claim prints exactly one PASS/FAIL
// line with the measured values and its tolerance, and the exit code is
// nonzero when any selected claim fails.
//
// Tolerances and budgets are pinned here on purpose: they are the contract,
// not knobs. Training-based claims use fixed seeds so a pass is
// reproducible run over run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spkid/archive.hpp"
#include "spkid/checkpoint.hpp"
#include "spkid/embedding.hpp"
#include "spkid/identification.hpp"
#include "spkid/rmc.hpp"
#include "spkid/rng.hpp"
#include "spkid/rttm.hpp"
#include "spkid/sequence.hpp"
#include "spkid/synth.hpp"
#include "spkid/timeline.hpp"
#include "spkid/trainer.hpp"

#include "../support/brute_force_ser.hpp"

namespace {

using namespace spkid;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string strprintf(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return std::string(buf);
}

void report(int n, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s (%s)\n", n, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// ---------------------------------------------------------------------------
// 1. Analytic gradients match central finite differences on random models.

bool criterion_1() {
  const auto t0 = Clock::now();
  RmcConfig cfg;
  cfg.n_max = 4;
  cfg.input_dim = 8;
  cfg.slot_width = 16;   // P
  cfg.heads = 2;         // H
  cfg.memory_slots = 3;  // Q
  cfg.attention_mlp_width = 16;
  cfg.mlp_head_layers = 2;
  cfg.mlp_head_width = 16;

  Rng rng(515253);
  double worst = 0.0;
  for (int pair = 0; pair < 20; ++pair) {
    cfg.seed = 9100 + pair;
    const RmcModel model = make_model(cfg);
    IdentificationSequence seq;
    seq.n_profiles = 2 + static_cast<int>(rng.uniform_int(3));  // 2..4 profiles
    seq.label = static_cast<int>(rng.uniform_int(seq.n_profiles));
    const int n_windows = 1 + static_cast<int>(rng.uniform_int(3));
    for (int i = 0; i < n_windows + seq.n_profiles; ++i) {
      seq.steps.push_back(length_normalize(rng.gaussian_vector(cfg.input_dim)));
    }
    worst = std::max(worst, check_gradients(model, seq, 1e-5).max_rel_err);
  }

  const double secs = seconds_since(t0);
  const bool pass = worst <= 1e-4 && secs <= 60.0;
  report(1, pass,
         strprintf("20 random models, 3 slots x 16 wide, 2 heads: max relative "
                   "gradient error %.3e vs 1.0e-4, %.1fs vs 60s",
                   worst, secs));
  return pass;
}

// ---------------------------------------------------------------------------
// 2. The event-sweep scorer agrees with a frame-discretized oracle.

double snap_10ms(double x) { return std::round(x * 100.0) / 100.0; }

Timeline random_grid_reference(Rng& rng, int n_speakers, int n_segments,
                               bool allow_overlap) {
  Timeline t;
  t.meeting_id = "m";
  double at = 0.5;
  for (int i = 0; i < n_segments; ++i) {
    const double dur = snap_10ms(rng.uniform(1.0, 4.0));
    const int spk = static_cast<int>(rng.uniform_int(n_speakers));
    t.segments.push_back({at, at + dur, "spk" + std::to_string(spk)});
    double gap = snap_10ms(rng.uniform(0.05, 1.2));
    if (allow_overlap && rng.uniform() < 0.4) {
      // Start the next segment inside this one; starts stay increasing.
      gap = -snap_10ms(rng.uniform(0.1, 0.5 * dur));
    }
    at += dur + gap;
  }
  return t;
}

Timeline corrupt_grid_hypothesis(const Timeline& ref, Rng& rng, int n_speakers) {
  Timeline h;
  h.meeting_id = ref.meeting_id;
  for (const auto& s : ref.segments) {
    if (rng.uniform() < 0.1) continue;  // miss: reference speech with no label
    Segment c = s;
    if (rng.uniform() < 0.35) {
      c.speaker = "spk" + std::to_string(rng.uniform_int(n_speakers));
    }
    if (rng.uniform() < 0.6) {
      c.start += snap_10ms(rng.uniform(-0.2, 0.2));
      c.end += snap_10ms(rng.uniform(-0.2, 0.2));
    }
    if (rng.uniform() < 0.25 && c.end - c.start > 0.4) {
      const double cut = snap_10ms(rng.uniform(c.start + 0.1, c.end - 0.1));
      if (cut > c.start && cut < c.end) {
        h.segments.push_back({c.start, cut, c.speaker});
        h.segments.push_back(
            {cut, c.end, "spk" + std::to_string(rng.uniform_int(n_speakers))});
        continue;
      }
    }
    h.segments.push_back(c);
  }
  std::sort(h.segments.begin(), h.segments.end(),
            [](const Segment& a, const Segment& b) { return a.start < b.start; });
  return h;
}

bool criterion_2() {
  const auto t0 = Clock::now();
  Rng rng(616263);
  double worst = 0.0;
  for (int c = 0; c < 50; ++c) {
    const int n_speakers = 2 + c % 3;
    const Timeline ref =
        random_grid_reference(rng, n_speakers, 6 + c % 5, /*allow_overlap=*/c % 2 == 1);
    const Timeline hyp = corrupt_grid_hypothesis(ref, rng, n_speakers);
    const double collar = c % 3 == 0 ? 0.0 : (c % 3 == 1 ? 0.1 : 0.25);
    const bool exclude_overlap = c % 4 != 3;
    const auto fast = compute_ser(ref, hyp, collar, exclude_overlap);
    const auto slow = spkid_tests::brute_force_ser(ref, hyp, collar, exclude_overlap);
    worst = std::max(worst, std::abs(fast.ser - slow.ser));
  }
  const double secs = seconds_since(t0);
  const bool pass = worst <= 0.001 && secs <= 30.0;
  report(2, pass,
         strprintf("50 randomized timelines with collars and overlap: max |SER "
                   "difference| %.4f points vs 0.1, %.1fs vs 30s",
                   100.0 * worst, secs));
  return pass;
}

// ---------------------------------------------------------------------------
// 3. A fresh model starts at the uniform-guess loss and overfits 200
//    sequences from four speakers.

bool criterion_3() {
  const auto t0 = Clock::now();
  Rng pool_rng(Rng::derive(303, 1));
  const ExamplePool pool = generate_pool(4, 16, 0.10, 4, 6, 5, nullptr, pool_rng);

  TrainingConfig tc;
  tc.learning_rate = 2e-3;
  tc.batch_size = 16;
  tc.seq_len_min = 4;
  tc.seq_len_max = 4;
  tc.context = 1;
  tc.permute_augmentation = true;
  Rng ex_rng(Rng::derive(303, 2));
  const auto examples = make_training_examples(pool, tc, 200, ex_rng);

  RmcConfig mc;
  mc.n_max = 4;
  mc.input_dim = 16;
  mc.slot_width = 64;
  mc.heads = 2;
  mc.attention_mlp_width = 64;
  mc.mlp_head_layers = 2;
  mc.mlp_head_width = 64;
  mc.seed = 31;
  RmcModel model = make_model(mc);

  double fresh = 0.0;
  for (const auto& seq : examples) fresh += loss_value(model, seq);
  fresh /= static_cast<double>(examples.size());
  const bool fresh_ok = std::abs(fresh - std::log(4.0)) <= 0.1;

  int epochs_used = 0;
  double acc = evaluate(model, examples);
  while (epochs_used < 500 && acc < 0.99) {
    tc.epochs = 20;
    tc.seed = 1000 + epochs_used;
    train(model, examples, tc);
    epochs_used += tc.epochs;
    acc = evaluate(model, examples);
  }

  const double secs = seconds_since(t0);
  const bool pass = fresh_ok && acc >= 0.99 && secs <= 300.0;
  report(3, pass,
         strprintf("fresh loss %.4f vs ln(4)=%.4f +-0.1; training accuracy %.1f%% "
                   "after %d epochs (>=99%% within 500), %.0fs vs 300s",
                   fresh, std::log(4.0), 100.0 * acc, epochs_used, secs));
  return pass;
}

// ---------------------------------------------------------------------------
// 4. Under channel mismatch, the trained identifier beats the cosine
//    baseline by a wide relative margin on held-out meetings with
//    speakers never seen in training.

std::vector<SpeakerModel> pick_party(const std::vector<SpeakerModel>& roster, int count,
                                     Rng& rng) {
  std::vector<int> idx(roster.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<SpeakerModel> party;
  for (int i = 0; i < count; ++i) {
    const int j = i + static_cast<int>(rng.uniform_int(idx.size() - i));
    std::swap(idx[i], idx[j]);
    party.push_back(roster[idx[i]]);
  }
  return party;
}

// Chunked schedule shared by the training-heavy claims. Early on the head
// only predicts the valid-position prior and the loss sits near the mean log
// sequence length; the rate stays constant until a chunk ends below
// settle_loss, then decays geometrically. Decaying earlier can stall the
// model on the prior, while never decaying lets a settled run blow up.
void train_chunked(RmcModel& model, std::span<const IdentificationSequence> examples,
                   TrainingConfig tc, int total_epochs, double settle_loss,
                   double chunk_decay) {
  const int chunk = tc.epochs;
  const std::uint64_t seed0 = tc.seed;
  bool settled = false;
  for (int done = 0; done < total_epochs; done += chunk) {
    tc.seed = seed0 + static_cast<std::uint64_t>(done);
    const auto log = train(model, examples, tc);
    if (log.back().mean_loss < settle_loss) settled = true;
    if (settled) tc.learning_rate *= chunk_decay;
  }
}

bool criterion_4() {
  const auto t0 = Clock::now();
  const int dim = 12;
  Rng roster_rng(Rng::derive(404, 1));
  const auto train_roster = make_roster(500, dim, 0.10, "s", roster_rng);
  const auto eval_roster = make_roster(50, dim, 0.10, "e", roster_rng);
  Rng channel_rng(Rng::derive(404, 2));
  const ChannelModel channel = make_channel(dim, 3.0, 0.05, channel_rng);

  MeetingParams pool_mp;
  pool_mp.n_turns = 14;
  pool_mp.turn_min = 1.6;
  pool_mp.turn_max = 4.5;
  pool_mp.silence_min = 0.4;
  pool_mp.silence_max = 0.9;
  pool_mp.enroll_draws = 5;
  Rng pool_rng(Rng::derive(404, 3));
  const ExamplePool pool = generate_meeting_pool(train_roster, 120, 5, pool_mp,
                                                 1.5, 0.75, &channel, pool_rng);

  TrainingConfig tc;
  tc.learning_rate = 2e-3;
  tc.batch_size = 16;
  tc.epochs = 5;
  tc.seq_len_min = 2;
  tc.seq_len_max = 4;
  tc.context = 1;
  tc.seed = 41;
  Rng ex_rng(Rng::derive(404, 4));
  const auto examples = make_training_examples(pool, tc, 9000, ex_rng);

  RmcConfig mc;
  mc.n_max = 4;
  mc.input_dim = dim;
  mc.slot_width = 24;
  mc.heads = 2;
  mc.attention_mlp_width = 24;
  mc.mlp_head_layers = 2;
  mc.mlp_head_width = 48;
  mc.seed = 47;
  RmcModel model = make_model(mc);
  train_chunked(model, examples, tc, 70, 0.95, 0.85);

  MeetingParams mp;
  mp.n_turns = 14;
  mp.turn_min = 1.6;
  mp.turn_max = 5.0;
  mp.silence_min = 0.4;
  mp.silence_max = 0.9;
  mp.enroll_draws = 5;

  std::vector<Timeline> refs, hyp_cos, hyp_rmc;
  for (int mi = 0; mi < 10; ++mi) {
    Rng mrng(Rng::derive(404, 100 + mi));
    const auto party = pick_party(eval_roster, 4, mrng);
    const std::string id = "meeting-" + std::to_string(mi);
    const auto m = generate_meeting(party, mp, 1.5, 0.75, &channel, mrng, id);
    refs.push_back(m.reference);
    hyp_cos.push_back(trajectory_to_segments(median_smooth(
        identify_meeting_cosine(m.windows, m.spans, m.profiles, id), 3)));
    hyp_rmc.push_back(trajectory_to_segments(median_smooth(
        identify_meeting_rmc(model, m.windows, m.spans, m.profiles, 1, id), 3)));
  }

  const auto rep_cos = compute_ser(refs, hyp_cos, 0.25, true);
  const auto rep_rmc = compute_ser(refs, hyp_rmc, 0.25, true);
  const double rel =
      rep_cos.ser > 0.0 ? (rep_cos.ser - rep_rmc.ser) / rep_cos.ser : -1.0;

  const double secs = seconds_since(t0);
  const bool pass = rep_cos.ser > 0.0 && rel >= 0.20 && secs <= 1800.0;
  report(4, pass,
         strprintf("500 train + 50 unseen speakers, channel mismatch: cosine SER "
                   "%.2f%%, trained SER %.2f%%, relative reduction %.1f%% vs 20%%, "
                   "%.0fs vs 1800s",
                   100.0 * rep_cos.ser, 100.0 * rep_rmc.ser, 100.0 * rel, secs));
  return pass;
}

// ---------------------------------------------------------------------------
// 5. Temporal context does not hurt: window accuracy with one context
//    window on each side is at least the no-context accuracy.

bool criterion_5() {
  const int dim = 12;
  std::vector<double> acc_ctx, acc_noctx;
  for (int seed = 1; seed <= 5; ++seed) {
    Rng roster_rng(Rng::derive(505, 10 * seed + 1));
    const auto train_roster = make_roster(500, dim, 0.10, "s", roster_rng);
    const auto eval_roster = make_roster(12, dim, 0.10, "e", roster_rng);
    MeetingParams pool_mp;
    pool_mp.n_turns = 14;
    pool_mp.turn_min = 1.6;
    pool_mp.turn_max = 4.5;
    pool_mp.silence_min = 0.4;
    pool_mp.silence_max = 0.9;
    pool_mp.enroll_draws = 5;
    Rng pool_rng(Rng::derive(505, 10 * seed + 2));
    const ExamplePool pool = generate_meeting_pool(train_roster, 120, 5, pool_mp,
                                                   1.5, 0.75, nullptr, pool_rng);

    MeetingParams mp;
    mp.n_turns = 12;
    mp.turn_min = 1.6;
    mp.turn_max = 4.5;
    mp.silence_min = 0.4;
    mp.silence_max = 0.9;
    mp.enroll_draws = 5;
    std::vector<GeneratedMeeting> meetings;
    for (int mi = 0; mi < 4; ++mi) {
      Rng mrng(Rng::derive(505, 100 * seed + mi));
      const auto party = pick_party(eval_roster, 4, mrng);
      meetings.push_back(generate_meeting(party, mp, 1.5, 0.75, nullptr, mrng,
                                          "meeting-" + std::to_string(mi)));
    }

    RmcConfig mc;
    mc.n_max = 4;
    mc.input_dim = dim;
    mc.slot_width = 24;
    mc.heads = 2;
    mc.attention_mlp_width = 24;
    mc.mlp_head_layers = 2;
    mc.mlp_head_width = 48;
    mc.seed = 1000 + seed;

    for (const int context : {1, 0}) {
      TrainingConfig tc;
      tc.learning_rate = 2e-3;
      tc.batch_size = 16;
      tc.epochs = 5;
      tc.seq_len_min = 2;
      tc.seq_len_max = 4;
      tc.context = context;
      tc.seed = 77 + seed;
      Rng ex_rng(Rng::derive(505, 10 * seed + 4));
      const auto examples = make_training_examples(pool, tc, 5000, ex_rng);
      RmcModel model = make_model(mc);
      train_chunked(model, examples, tc, 70, 0.95, 0.85);

      double correct = 0.0, total = 0.0;
      for (const auto& m : meetings) {
        const auto traj = identify_meeting_rmc(model, m.windows, m.spans, m.profiles,
                                               context, m.reference.meeting_id);
        const double a = window_accuracy(traj, m.reference);
        correct += a * static_cast<double>(traj.entries.size());
        total += static_cast<double>(traj.entries.size());
      }
      (context == 1 ? acc_ctx : acc_noctx).push_back(correct / total);
    }
  }

  const double med_ctx = median_of(acc_ctx);
  const double med_noctx = median_of(acc_noctx);
  const bool pass = med_ctx >= med_noctx;
  report(5, pass,
         strprintf("median window accuracy over 5 seeds: context=1 %.2f%% vs "
                   "context=0 %.2f%%",
                   100.0 * med_ctx, 100.0 * med_noctx));
  return pass;
}

// ---------------------------------------------------------------------------
// 6. Training with 2..9 profiles per sequence generalizes to 4-speaker
//    meetings nearly as well as training with exactly 4.

bool criterion_6() {
  const int dim = 12;
  Rng roster_rng(Rng::derive(606, 1));
  const auto train_roster = make_roster(500, dim, 0.10, "s", roster_rng);
  const auto eval_roster = make_roster(15, dim, 0.10, "e", roster_rng);
  MeetingParams pool_mp;
  pool_mp.n_turns = 14;
  pool_mp.turn_min = 1.6;
  pool_mp.turn_max = 4.5;
  pool_mp.silence_min = 0.4;
  pool_mp.silence_max = 0.9;
  pool_mp.enroll_draws = 5;
  Rng pool_rng(Rng::derive(606, 2));
  const ExamplePool pool = generate_meeting_pool(train_roster, 150, 5, pool_mp,
                                                 1.5, 0.75, nullptr, pool_rng);

  RmcConfig mc;
  mc.n_max = 9;
  mc.input_dim = dim;
  mc.slot_width = 24;
  mc.heads = 2;
  mc.attention_mlp_width = 24;
  mc.mlp_head_layers = 2;
  mc.mlp_head_width = 48;
  mc.seed = 61;

  MeetingParams mp;
  mp.n_turns = 12;
  mp.turn_min = 1.6;
  mp.turn_max = 4.5;
  mp.silence_min = 0.4;
  mp.silence_max = 0.9;
  mp.enroll_draws = 5;
  std::vector<GeneratedMeeting> meetings;
  for (int mi = 0; mi < 6; ++mi) {
    Rng mrng(Rng::derive(606, 100 + mi));
    const auto party = pick_party(eval_roster, 4, mrng);
    meetings.push_back(generate_meeting(party, mp, 1.5, 0.75, nullptr, mrng,
                                        "meeting-" + std::to_string(mi)));
  }

  // Both models share one short-sequence warmup phase and differ only in
  // the sequence-length law of the final phase. Trained from scratch,
  // either length law alone parks at the valid-position prior for this
  // budget, which would make the comparison vacuous; the measurement of
  // interest is the cost of length jitter once the matcher works at all.
  TrainingConfig tw;
  tw.learning_rate = 2e-3;
  tw.batch_size = 16;
  tw.epochs = 5;
  tw.seq_len_min = 2;
  tw.seq_len_max = 4;
  tw.context = 1;
  tw.seed = 63;
  Rng wx_rng(Rng::derive(606, 3));
  const auto warm_examples = make_training_examples(pool, tw, 6000, wx_rng);
  RmcModel warm = make_model(mc);
  int warm_epochs = 0;
  while (warm_epochs < 120) {
    tw.seed = 63 + static_cast<std::uint64_t>(warm_epochs);
    const auto log = train(warm, warm_examples, tw);
    warm_epochs += tw.epochs;
    if (log.back().mean_loss < 0.90) break;
  }

  auto finish_and_score = [&](int len_min, int len_max, std::uint64_t ex_stream,
                              std::uint64_t seed0) {
    TrainingConfig tc = tw;
    tc.seq_len_min = len_min;
    tc.seq_len_max = len_max;
    tc.seed = seed0;
    Rng ex_rng(Rng::derive(606, ex_stream));
    const auto examples = make_training_examples(pool, tc, 6000, ex_rng);
    RmcModel model = warm;
    // Already past the prior thanks to the warmup, so decay from the start.
    train_chunked(model, examples, tc, 20, 2.0, 0.9);
    double correct = 0.0, total = 0.0;
    for (const auto& m : meetings) {
      const auto traj = identify_meeting_rmc(model, m.windows, m.spans, m.profiles, 1,
                                             m.reference.meeting_id);
      correct += window_accuracy(traj, m.reference) *
                 static_cast<double>(traj.entries.size());
      total += static_cast<double>(traj.entries.size());
    }
    return correct / total;
  };

  const double acc_var = finish_and_score(2, 9, 4, 200);
  const double acc_fix = finish_and_score(4, 4, 5, 300);
  const double gap_points = 100.0 * (acc_fix - acc_var);
  const bool pass = gap_points <= 3.0;
  report(6, pass,
         strprintf("4-speaker meeting accuracy: trained on 2..9 profiles %.2f%%, "
                   "trained on fixed 4 %.2f%%, gap %.2f points vs 3.0 "
                   "(%d shared warmup epochs)",
                   100.0 * acc_var, 100.0 * acc_fix, gap_points, warm_epochs));
  return pass;
}

// ---------------------------------------------------------------------------
// 7. A 3-tap median filter removes all isolated interior label flips and
//    strictly lowers SER, deterministically.

struct FlipRun {
  std::vector<int> flip_positions;
  std::vector<int> smoothed_labels;
  int removed = 0;
  double ser_before = 0.0;
  double ser_after = 0.0;
};

bool criterion_7() {
  Rng roster_rng(Rng::derive(707, 1));
  const auto roster = make_roster(4, 8, 0.0, "s", roster_rng);
  MeetingParams mp;
  mp.n_turns = 20;
  mp.turn_min = 4.0;
  mp.turn_max = 8.0;
  mp.silence_min = 0.4;
  mp.silence_max = 1.0;
  mp.enroll_draws = 3;
  Rng mrng(Rng::derive(707, 2));
  const auto m = generate_meeting(roster, mp, 1.5, 0.75, nullptr, mrng, "meeting-flips");

  LabelTrajectory perfect;
  perfect.meeting_id = m.reference.meeting_id;
  for (const auto& p : m.profiles) perfect.speaker_ids.push_back(p.speaker_id);
  for (const auto& span : m.spans) {
    const std::string& spk = m.reference.segments[span.segment_index].speaker;
    int label = -1;
    for (std::size_t i = 0; i < perfect.speaker_ids.size(); ++i) {
      if (perfect.speaker_ids[i] == spk) label = static_cast<int>(i);
    }
    perfect.entries.push_back({span.start, span.end, label, {}});
  }
  const int n = static_cast<int>(perfect.entries.size());
  const int target = static_cast<int>(std::lround(0.10 * n));

  auto run_once = [&]() {
    // Flips are placed two or more windows away from every label change
    // and three or more apart from each other, so each one is a strictly
    // interior isolated error: both neighbors keep the correct label.
    std::vector<int> eligible;
    for (int i = 2; i + 2 < n; ++i) {
      const int lab = perfect.entries[i].label;
      if (perfect.entries[i - 2].label == lab && perfect.entries[i - 1].label == lab &&
          perfect.entries[i + 1].label == lab && perfect.entries[i + 2].label == lab) {
        eligible.push_back(i);
      }
    }
    Rng frng(Rng::derive(707, 3));
    for (std::size_t i = eligible.size() - 1; i > 0; --i) {
      std::swap(eligible[i], eligible[frng.uniform_int(i + 1)]);
    }
    FlipRun run;
    for (const int cand : eligible) {
      bool spaced = true;
      for (const int c : run.flip_positions) {
        if (std::abs(c - cand) < 3) { spaced = false; break; }
      }
      if (!spaced) continue;
      run.flip_positions.push_back(cand);
      if (static_cast<int>(run.flip_positions.size()) == target) break;
    }

    LabelTrajectory flipped = perfect;
    for (const int p : run.flip_positions) {
      const int old = flipped.entries[p].label;
      flipped.entries[p].label =
          (old + 1 + static_cast<int>(frng.uniform_int(3))) % 4;
    }

    const LabelTrajectory smoothed = median_smooth(flipped, 3);
    for (const auto& e : smoothed.entries) run.smoothed_labels.push_back(e.label);
    for (const int p : run.flip_positions) {
      if (smoothed.entries[p].label == perfect.entries[p].label) ++run.removed;
    }
    run.ser_before =
        compute_ser(m.reference, trajectory_to_segments(flipped), 0.0, true).ser;
    run.ser_after =
        compute_ser(m.reference, trajectory_to_segments(smoothed), 0.0, true).ser;
    return run;
  };

  const FlipRun a = run_once();
  const FlipRun b = run_once();
  const bool deterministic = a.flip_positions == b.flip_positions &&
                             a.smoothed_labels == b.smoothed_labels &&
                             a.ser_before == b.ser_before && a.ser_after == b.ser_after;
  const bool reached_rate = static_cast<int>(a.flip_positions.size()) == target;
  const bool all_removed = a.removed == static_cast<int>(a.flip_positions.size());
  const bool ser_drops = a.ser_before > 0.0 && a.ser_after < a.ser_before;

  const bool pass = reached_rate && all_removed && ser_drops && deterministic;
  report(7, pass,
         strprintf("%d/%d interior flips removed by 3-tap median (10%% of %d "
                   "windows), SER %.2f%% -> %.2f%%, deterministic=%s",
                   a.removed, static_cast<int>(a.flip_positions.size()), n,
                   100.0 * a.ser_before, 100.0 * a.ser_after,
                   deterministic ? "yes" : "no"));
  return pass;
}

// ---------------------------------------------------------------------------
// 8. The attention cell generalizes to unseen speakers at least as well as
//    the LSTM variant sharing its state width, projection, and head.

bool criterion_8() {
  const int dim = 12;

  RmcConfig mc;
  mc.n_max = 4;
  mc.input_dim = dim;
  mc.slot_width = 24;
  mc.heads = 2;
  mc.attention_mlp_width = 24;
  mc.mlp_head_layers = 2;
  mc.mlp_head_width = 48;

  // The LSTM's single recurrent matrix on a Q*P-wide hidden state costs far
  // more parameters at equal slot width, so its slot width is swept down
  // until the totals align.
  const std::size_t target = make_model(mc, CellKind::kRmc).parameter_count();
  RmcConfig lc = mc;
  {
    std::size_t best_diff = std::numeric_limits<std::size_t>::max();
    for (int p = 4; p <= mc.slot_width; ++p) {
      RmcConfig c = mc;
      c.heads = 1;
      c.slot_width = p;
      c.attention_mlp_width = p;
      const std::size_t n = make_model(c, CellKind::kLstm).parameter_count();
      const std::size_t diff = n > target ? n - target : target - n;
      if (diff < best_diff) {
        best_diff = diff;
        lc = c;
      }
    }
  }

  std::vector<double> acc_rmc, acc_lstm;
  std::size_t params_rmc = 0, params_lstm = 0;
  for (int seed = 1; seed <= 5; ++seed) {
    Rng roster_rng(Rng::derive(808, 10 * seed + 1));
    const auto train_roster = make_roster(500, dim, 0.10, "s", roster_rng);
    const auto eval_roster = make_roster(16, dim, 0.10, "e", roster_rng);
    MeetingParams pool_mp;
    pool_mp.n_turns = 14;
    pool_mp.turn_min = 1.6;
    pool_mp.turn_max = 4.5;
    pool_mp.silence_min = 0.4;
    pool_mp.silence_max = 0.9;
    pool_mp.enroll_draws = 5;
    Rng pool_rng(Rng::derive(808, 10 * seed + 2));
    const ExamplePool pool = generate_meeting_pool(train_roster, 120, 5, pool_mp,
                                                   1.5, 0.75, nullptr, pool_rng);
    Rng eval_pool_rng(Rng::derive(808, 10 * seed + 3));
    const ExamplePool eval_pool = generate_meeting_pool(
        eval_roster, 4, 5, pool_mp, 1.5, 0.75, nullptr, eval_pool_rng);

    TrainingConfig tc;
    tc.learning_rate = 2e-3;
    tc.batch_size = 16;
    tc.epochs = 5;
    tc.seq_len_min = 2;
    tc.seq_len_max = 4;
    tc.context = 1;
    tc.seed = 88 + seed;
    Rng ex_rng(Rng::derive(808, 10 * seed + 4));
    const auto examples = make_training_examples(pool, tc, 6000, ex_rng);
    Rng eval_ex_rng(Rng::derive(808, 10 * seed + 5));
    const auto eval_examples = make_training_examples(eval_pool, tc, 600, eval_ex_rng);

    mc.seed = 2000 + seed;
    lc.seed = 2000 + seed;
    RmcModel rmc = make_model(mc, CellKind::kRmc);
    RmcModel lstm = make_model(lc, CellKind::kLstm);
    params_rmc = rmc.parameter_count();
    params_lstm = lstm.parameter_count();
    train_chunked(rmc, examples, tc, 60, 0.95, 0.9);
    train_chunked(lstm, examples, tc, 60, 0.95, 0.9);
    acc_rmc.push_back(evaluate(rmc, eval_examples));
    acc_lstm.push_back(evaluate(lstm, eval_examples));
  }

  const double med_rmc = median_of(acc_rmc);
  const double med_lstm = median_of(acc_lstm);
  const bool pass = med_rmc >= med_lstm;
  report(8, pass,
         strprintf("unseen-speaker accuracy, median over 5 seeds: attention cell "
                   "%.2f%% (%zu params) vs LSTM %.2f%% (%zu params)",
                   100.0 * med_rmc, params_rmc, 100.0 * med_lstm, params_lstm));
  return pass;
}

// ---------------------------------------------------------------------------
// 9. Bitwise determinism and file round trips.

bool criterion_9() {
  bool ok = true;
  std::string failure;

  // Archives regenerate byte-identically from the same seed.
  auto build_archive = []() {
    Rng rng(Rng::derive(909, 1));
    const ExamplePool pool = generate_pool(3, 8, 0.2, 2, 3, 3, nullptr, rng);
    EmbeddingArchive a;
    a.dim = 8;
    int u = 0;
    for (const auto& utt : pool.utterances) {
      int w = 0;
      for (const auto& e : utt.windows) {
        const double at = 0.75 * w;
        a.records.push_back(
            {utt.speaker_id + "/u" + std::to_string(u), at, at + 1.5, e});
        ++w;
      }
      ++u;
    }
    return a;
  };
  std::ostringstream arch1, arch2;
  write_archive(arch1, build_archive());
  write_archive(arch2, build_archive());
  if (arch1.str() != arch2.str()) {
    ok = false;
    failure = "regenerated archives differ";
  }

  // Training runs reproduce byte-identical checkpoints.
  auto build_trained = []() {
    Rng pool_rng(Rng::derive(909, 2));
    const ExamplePool pool = generate_pool(4, 8, 0.2, 2, 4, 3, nullptr, pool_rng);
    TrainingConfig tc;
    tc.learning_rate = 2e-3;
    tc.batch_size = 8;
    tc.epochs = 2;
    tc.seq_len_min = 2;
    tc.seq_len_max = 4;
    tc.context = 1;
    tc.seed = 9;
    Rng ex_rng(Rng::derive(909, 3));
    const auto examples = make_training_examples(pool, tc, 64, ex_rng);
    RmcConfig mc;
    mc.n_max = 4;
    mc.input_dim = 8;
    mc.slot_width = 8;
    mc.heads = 2;
    mc.attention_mlp_width = 8;
    mc.mlp_head_layers = 2;
    mc.mlp_head_width = 16;
    mc.seed = 99;
    RmcModel model = make_model(mc);
    train(model, examples, tc);
    return std::make_pair(std::move(model), examples);
  };
  const auto [model_a, examples_a] = build_trained();
  const auto [model_b, examples_b] = build_trained();
  std::ostringstream ck1, ck2;
  write_checkpoint(ck1, model_a, "after 2 epochs");
  write_checkpoint(ck2, model_b, "after 2 epochs");
  if (ok && ck1.str() != ck2.str()) {
    ok = false;
    failure = "retrained checkpoints differ";
  }

  // Reload reproduces the forward pass bit for bit.
  std::istringstream ck_in(ck1.str());
  const LoadedCheckpoint loaded = read_checkpoint(ck_in);
  for (int i = 0; i < 5 && ok; ++i) {
    const Eigen::VectorXd before = forward(model_a, examples_a[i]);
    const Eigen::VectorXd after = forward(loaded.model, examples_a[i]);
    if (!(before == after)) {
      ok = false;
      failure = "reloaded forward pass differs";
    }
  }

  // RTTM survives a write/read cycle within 1 ms and is then a fixed point.
  Timeline t;
  t.meeting_id = "meeting-rt";
  double at = 1.0 / 3.0;
  for (int i = 0; i < 10; ++i) {
    const double dur = 1.987654321 / (1.0 + 0.37 * i) + 0.5;
    t.segments.push_back({at, at + dur, i % 2 == 0 ? "alpha" : "beta"});
    at += dur + 0.123456789;
  }
  std::ostringstream rt1;
  write_rttm(rt1, t);
  std::istringstream rt_in(rt1.str());
  const auto read_back = read_rttm(rt_in);
  if (ok && (read_back.size() != 1 ||
             read_back[0].segments.size() != t.segments.size())) {
    ok = false;
    failure = "rttm read back the wrong shape";
  }
  double worst_ms = 0.0;
  if (ok) {
    for (std::size_t i = 0; i < t.segments.size(); ++i) {
      worst_ms = std::max(
          worst_ms, 1000.0 * std::abs(read_back[0].segments[i].start - t.segments[i].start));
      worst_ms = std::max(
          worst_ms, 1000.0 * std::abs(read_back[0].segments[i].end - t.segments[i].end));
    }
    if (worst_ms > 1.0) {
      ok = false;
      failure = strprintf("rttm round trip off by %.3f ms", worst_ms);
    }
    std::ostringstream rt2;
    write_rttm(rt2, read_back[0]);
    if (ok && rt1.str() != rt2.str()) {
      ok = false;
      failure = "rttm is not a fixed point after one round trip";
    }
  }

  report(9, ok,
         ok ? strprintf("archives and checkpoints byte-identical, reload forward "
                        "bit-exact, rttm round trip within %.3f ms",
                        worst_ms)
            : failure);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  int which = 0;
  if (argc > 1) {
    which = std::atoi(argv[1]);
    if (which < 1 || which > 9) {
      std::fprintf(stderr, "usage: acceptance [1-9]\n");
      return 2;
    }
  }

  bool (*const checks[9])() = {criterion_1, criterion_2, criterion_3,
                               criterion_4, criterion_5, criterion_6,
                               criterion_7, criterion_8, criterion_9};
  bool all_ok = true;
  try {
    if (which > 0) {
      all_ok = checks[which - 1]();
    } else {
      for (const auto& check : checks) all_ok = check() && all_ok;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance: unexpected exception: %s\n", e.what());
    return 2;
  }
  return all_ok ? 0 : 1;
}
