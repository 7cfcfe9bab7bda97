// tools/spkid.cpp

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

// Command-line pipeline: synth -> fit-backend -> enroll -> train ->
// identify -> score, plus a median-taps sweep. Every failure exits nonzero
// with a single "spkid: error: ..." line on stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spkid/archive.hpp"
#include "spkid/checkpoint.hpp"
#include "spkid/experiment.hpp"
#include "spkid/identification.hpp"
#include "spkid/lda.hpp"
#include "spkid/rmc.hpp"
#include "spkid/rttm.hpp"
#include "spkid/synth.hpp"
#include "spkid/timeline.hpp"
#include "spkid/trainer.hpp"

namespace {

using namespace spkid;

std::string speaker_of(const std::string& record_id) {
  const auto slash = record_id.find('/');
  return slash == std::string::npos ? record_id : record_id.substr(0, slash);
}

void apply_projection_inplace(const ProjectionModel& proj, std::vector<Embedding>& vecs) {
  for (auto& v : vecs) v = apply_projection(proj, v);
}

std::vector<SpeakerProfile> load_profiles(const std::string& path) {
  const EmbeddingArchive a = load_archive(path);
  std::vector<SpeakerProfile> profiles;
  for (const auto& r : a.records) profiles.push_back({r.id, r.vector});
  if (profiles.empty()) throw std::runtime_error("no profiles in " + path);
  return profiles;
}

// Labeled pool archive -> ExamplePool: records sharing an id form one
// utterance (in file order); the speaker is the id part before '/'.
ExamplePool pool_from_archive(const EmbeddingArchive& a,
                              const std::vector<SpeakerProfile>& profiles,
                              const ProjectionModel* proj) {
  ExamplePool pool;
  pool.profiles = profiles;
  // Consecutive records sharing a full id form one utterance.
  std::string current_id;
  for (const auto& r : a.records) {
    if (r.id != current_id) {
      current_id = r.id;
      pool.utterances.push_back({speaker_of(r.id), {}});
    }
    pool.utterances.back().windows.push_back(proj ? apply_projection(*proj, r.vector)
                                                  : r.vector);
  }
  pool.validate();
  return pool;
}

struct MeetingArchive {
  std::string meeting_id;
  std::vector<Embedding> windows;
  std::vector<WindowSpan> spans;
};

MeetingArchive meeting_from_archive(const EmbeddingArchive& a, const ProjectionModel* proj) {
  if (a.records.empty()) throw std::runtime_error("meeting archive has no windows");
  MeetingArchive m;
  m.meeting_id = a.records.front().id;
  for (const auto& r : a.records) {
    if (r.id != m.meeting_id) {
      throw std::runtime_error("meeting archive mixes ids '" + m.meeting_id + "' and '" +
                               r.id + "'");
    }
    m.windows.push_back(proj ? apply_projection(*proj, r.vector) : r.vector);
    m.spans.push_back({r.start, r.end, -1});
  }
  return m;
}

void write_trajectory_file(const std::string& path, const LabelTrajectory& traj) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "# meeting=" << traj.meeting_id << " speakers=";
  for (std::size_t i = 0; i < traj.speaker_ids.size(); ++i) {
    os << (i ? "," : "") << traj.speaker_ids[i];
  }
  os << '\n';
  char buf[64];
  for (const auto& e : traj.entries) {
    std::snprintf(buf, sizeof(buf), "%.3f %.3f %d ", e.start, e.end, e.label);
    os << buf << traj.speaker_ids[e.label] << '\n';
  }
}

LabelTrajectory read_trajectory_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  LabelTrajectory traj;
  std::string header;
  std::getline(is, header);
  const auto mpos = header.find("meeting=");
  const auto spos = header.find("speakers=");
  if (mpos == std::string::npos || spos == std::string::npos) {
    throw std::runtime_error("bad trajectory header in " + path);
  }
  traj.meeting_id = header.substr(mpos + 8, header.find(' ', mpos + 8) - (mpos + 8));
  std::string spk_list = header.substr(spos + 9);
  for (std::size_t a = 0; a < spk_list.size();) {
    auto b = spk_list.find(',', a);
    if (b == std::string::npos) b = spk_list.size();
    traj.speaker_ids.push_back(spk_list.substr(a, b - a));
    a = b + 1;
  }
  double start = 0.0, end = 0.0;
  int label = 0;
  std::string speaker;
  while (is >> start >> end >> label >> speaker) {
    traj.entries.push_back({start, end, label, Eigen::VectorXd()});
  }
  return traj;
}

// ---- synth ----

struct SynthArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

void run_synth(const SynthArgs& args) {
  ExperimentConfig cfg =
      args.config_path.empty() ? ExperimentConfig{} : load_experiment_config(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (cfg.meeting_speakers < 2 || cfg.meeting_speakers > cfg.eval_speakers) {
    throw std::runtime_error("synth: need 2 <= meeting_speakers <= eval_speakers");
  }
  std::filesystem::create_directories(args.out_dir);
  const auto out = [&args](const std::string& name) {
    return (std::filesystem::path(args.out_dir) / name).string();
  };
  save_resolved_config(out("config.json"), cfg);

  Rng roster_rng(Rng::derive(cfg.seed, 1));
  const auto train_roster = make_roster(cfg.n_speakers, cfg.dim, cfg.speaker_sigma, "s", roster_rng);
  const auto eval_roster = make_roster(cfg.eval_speakers, cfg.dim, cfg.speaker_sigma, "e", roster_rng);

  ChannelModel channel;
  if (cfg.channel_enabled) {
    Rng channel_rng(Rng::derive(cfg.seed, 2));
    channel = make_channel(cfg.dim, cfg.channel_strength, cfg.channel_noise, channel_rng);
  }
  const ChannelModel* ch = cfg.channel_enabled ? &channel : nullptr;

  // Train pool: labeled windows plus clean enrollment draws.
  Rng pool_rng(Rng::derive(cfg.seed, 3));
  EmbeddingArchive train_arc, train_enroll;
  train_arc.dim = train_enroll.dim = static_cast<std::uint32_t>(cfg.dim);
  for (const auto& spk : train_roster) {
    for (int e = 0; e < cfg.enroll_draws; ++e) {
      train_enroll.records.push_back(
          {spk.speaker_id + "/enroll", 0.0, 0.0, sample_speaker_embedding(spk, pool_rng)});
    }
    for (int u = 0; u < cfg.utterances_per_speaker; ++u) {
      const std::string utt_id = spk.speaker_id + "/u" + std::to_string(u);
      for (int w = 0; w < cfg.windows_per_utterance; ++w) {
        Embedding v = sample_speaker_embedding(spk, pool_rng);
        if (ch) v = apply_channel(*ch, v, pool_rng);
        const double t0 = w * cfg.window_shift;
        train_arc.records.push_back({utt_id, t0, t0 + cfg.window_length, std::move(v)});
      }
    }
  }
  save_archive(out("train.xvec"), train_arc);
  save_archive(out("train.enroll.xvec"), train_enroll);

  // Meetings over subsets of the eval roster.
  MeetingParams params;
  params.n_turns = cfg.turns_per_meeting;
  params.turn_min = cfg.turn_min;
  params.turn_max = cfg.turn_max;
  params.silence_min = cfg.silence_min;
  params.silence_max = cfg.silence_max;
  params.enroll_draws = cfg.enroll_draws;

  std::vector<Timeline> references;
  for (int mi = 0; mi < cfg.meetings; ++mi) {
    Rng rng(Rng::derive(cfg.seed, 100 + static_cast<std::uint64_t>(mi)));
    auto pick = rng.permutation(cfg.eval_speakers);
    std::vector<SpeakerModel> participants;
    for (int k = 0; k < cfg.meeting_speakers; ++k) participants.push_back(eval_roster[pick[k]]);
    const std::string meeting_id = "meeting-" + std::to_string(mi);
    GeneratedMeeting gm = generate_meeting(participants, params, cfg.window_length,
                                           cfg.window_shift, ch, rng, meeting_id);
    EmbeddingArchive windows, enroll;
    windows.dim = enroll.dim = static_cast<std::uint32_t>(cfg.dim);
    for (std::size_t w = 0; w < gm.windows.size(); ++w) {
      windows.records.push_back(
          {meeting_id, gm.spans[w].start, gm.spans[w].end, gm.windows[w]});
    }
    // Profiles are re-estimated downstream by `enroll`; emit the raw clean
    // draws so that step stays honest.
    Rng enroll_rng(Rng::derive(cfg.seed, 200 + static_cast<std::uint64_t>(mi)));
    for (const auto& spk : participants) {
      for (int e = 0; e < cfg.enroll_draws; ++e) {
        enroll.records.push_back(
            {spk.speaker_id + "/enroll", 0.0, 0.0, sample_speaker_embedding(spk, enroll_rng)});
      }
    }
    save_archive(out(meeting_id + ".xvec"), windows);
    save_archive(out(meeting_id + ".enroll.xvec"), enroll);
    references.push_back(gm.reference);
  }
  std::ofstream rttm(out("ref.rttm"));
  if (!rttm) throw std::runtime_error("cannot write " + out("ref.rttm"));
  write_rttm(rttm, references);
  std::cout << "synth: wrote " << cfg.n_speakers << " train speakers, " << cfg.meetings
            << " meetings to " << args.out_dir << '\n';
}

// ---- fit-backend ----

struct FitBackendArgs {
  std::string input;
  std::string output;
  int dim = 0;
};

void run_fit_backend(const FitBackendArgs& args) {
  const EmbeddingArchive a = load_archive(args.input);
  std::vector<std::pair<Embedding, std::string>> samples;
  for (const auto& r : a.records) samples.emplace_back(r.vector, speaker_of(r.id));
  const int d_out = args.dim > 0 ? args.dim : static_cast<int>(a.dim);
  ProjectionModel proj = fit_lda(samples, d_out);
  save_projection(args.output, proj);
  std::cout << "fit-backend: " << proj.d_in << " -> " << proj.d_out << " dims from "
            << samples.size() << " embeddings\n";
}

// ---- enroll ----

struct EnrollArgs {
  std::string input;
  std::string output;
  std::string projection;
};

void run_enroll(const EnrollArgs& args) {
  const EmbeddingArchive a = load_archive(args.input);
  std::optional<ProjectionModel> proj;
  if (!args.projection.empty()) proj = load_projection(args.projection);

  std::vector<std::string> order;  // first-seen speaker order
  std::vector<std::vector<Embedding>> draws;
  for (const auto& r : a.records) {
    const std::string spk = speaker_of(r.id);
    std::size_t idx = 0;
    for (; idx < order.size(); ++idx) {
      if (order[idx] == spk) break;
    }
    if (idx == order.size()) {
      order.push_back(spk);
      draws.emplace_back();
    }
    draws[idx].push_back(proj ? apply_projection(*proj, r.vector) : r.vector);
  }
  if (order.empty()) throw std::runtime_error("enroll: no records in " + args.input);

  EmbeddingArchive profiles;
  profiles.dim = proj ? static_cast<std::uint32_t>(proj->d_out) : a.dim;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const SpeakerProfile p = estimate_profile(order[i], draws[i]);
    profiles.records.push_back({p.speaker_id, 0.0, 0.0, p.vector});
  }
  save_archive(args.output, profiles);
  std::cout << "enroll: " << order.size() << " profiles from " << a.records.size()
            << " draws\n";
}

// ---- train ----

struct TrainArgs {
  std::string config_path;
  std::string train_archive;
  std::string profiles_archive;
  std::string projection;
  std::string out_checkpoint;
  std::string log_path;
  std::string seq_len_range;
  std::string cell;
  int context = -1;
  int epochs = -1;
  int examples = -1;
  double learning_rate = -1.0;
  std::optional<std::uint64_t> seed;
};

void run_train(const TrainArgs& args) {
  ExperimentConfig cfg =
      args.config_path.empty() ? ExperimentConfig{} : load_experiment_config(args.config_path);
  if (!args.seq_len_range.empty()) {
    const auto colon = args.seq_len_range.find(':');
    if (colon == std::string::npos) {
      throw std::runtime_error("--seq-len-range expects MIN:MAX, got '" + args.seq_len_range +
                               "'");
    }
    cfg.training.seq_len_min = std::stoi(args.seq_len_range.substr(0, colon));
    cfg.training.seq_len_max = std::stoi(args.seq_len_range.substr(colon + 1));
  }
  if (args.context >= 0) cfg.training.context = args.context;
  if (args.epochs >= 0) cfg.training.epochs = args.epochs;
  if (args.examples >= 0) cfg.training_examples = args.examples;
  if (args.learning_rate >= 0.0) cfg.training.learning_rate = args.learning_rate;
  if (args.seed) {
    cfg.training.seed = *args.seed;
    cfg.model.seed = *args.seed;
  }
  if (!args.cell.empty()) {
    if (args.cell == "rmc") {
      cfg.cell = CellKind::kRmc;
    } else if (args.cell == "lstm") {
      cfg.cell = CellKind::kLstm;
    } else {
      throw std::runtime_error("--cell must be rmc or lstm");
    }
  }

  std::optional<ProjectionModel> proj;
  if (!args.projection.empty()) proj = load_projection(args.projection);
  const EmbeddingArchive train_arc = load_archive(args.train_archive);
  const auto profiles = load_profiles(args.profiles_archive);
  ExamplePool pool = pool_from_archive(train_arc, profiles, proj ? &*proj : nullptr);

  const int dim = static_cast<int>(pool.profiles.front().vector.size());
  if (cfg.model.input_dim == 0) cfg.model.input_dim = dim;
  if (cfg.model.input_dim != dim) {
    throw std::runtime_error("train: model input_dim " + std::to_string(cfg.model.input_dim) +
                             " does not match data dim " + std::to_string(dim));
  }

  RmcModel model = make_model(cfg.model, cfg.cell);
  Rng example_rng(Rng::derive(cfg.training.seed, 17));
  const auto examples =
      make_training_examples(pool, cfg.training, cfg.training_examples, example_rng);
  const TrainingLog log = train(model, examples, cfg.training);

  save_checkpoint(args.out_checkpoint, model, config_to_json(cfg).dump(2));
  const std::string log_path =
      args.log_path.empty() ? args.out_checkpoint + ".log" : args.log_path;
  std::ofstream lf(log_path);
  if (!lf) throw std::runtime_error("cannot write " + log_path);
  char buf[96];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "epoch %d loss %.6f acc %.4f", e.epoch, e.mean_loss,
                  e.accuracy);
    lf << buf << '\n';
    std::cout << buf << '\n';
  }
  std::cout << "train: wrote " << args.out_checkpoint << " ("
            << model.parameter_count() << " parameters)\n";
}

// ---- identify ----

struct IdentifyArgs {
  std::string system = "cosine";
  std::string checkpoint;
  std::string meeting_archive;
  std::string profiles_archive;
  std::string projection;
  std::string out_rttm;
  std::string out_traj;
  int context = 1;
  int taps = 1;
  bool mode_filter = false;
};

LabelTrajectory identify_trajectory(const IdentifyArgs& args) {
  std::optional<ProjectionModel> proj;
  if (!args.projection.empty()) proj = load_projection(args.projection);
  const MeetingArchive meeting =
      meeting_from_archive(load_archive(args.meeting_archive), proj ? &*proj : nullptr);
  const auto profiles = load_profiles(args.profiles_archive);

  LabelTrajectory traj;
  if (args.system == "cosine") {
    traj = identify_meeting_cosine(meeting.windows, meeting.spans, profiles,
                                   meeting.meeting_id);
  } else if (args.system == "rmc") {
    if (args.checkpoint.empty()) {
      throw std::runtime_error("identify: --system rmc requires --checkpoint");
    }
    const RmcModel model = load_checkpoint(args.checkpoint).model;
    traj = identify_meeting_rmc(model, meeting.windows, meeting.spans, profiles,
                                args.context, meeting.meeting_id);
  } else {
    throw std::runtime_error("identify: unknown system '" + args.system + "'");
  }
  if (args.taps > 1) {
    traj = args.mode_filter ? mode_smooth(traj, args.taps) : median_smooth(traj, args.taps);
  }
  return traj;
}

void run_identify(const IdentifyArgs& args) {
  const LabelTrajectory traj = identify_trajectory(args);
  const Timeline hyp = trajectory_to_segments(traj);
  if (!args.out_rttm.empty()) {
    std::ofstream os(args.out_rttm);
    if (!os) throw std::runtime_error("cannot write " + args.out_rttm);
    write_rttm(os, hyp);
  }
  if (!args.out_traj.empty()) write_trajectory_file(args.out_traj, traj);
  std::cout << "identify: " << traj.entries.size() << " windows, " << hyp.segments.size()
            << " segments (" << args.system << ", taps " << args.taps << ")\n";
}

// ---- score ----

struct ScoreArgs {
  std::string ref_rttm;
  std::string hyp_rttm;
  std::string traj_path;
  double collar = 0.25;
  bool ignore_overlap = true;
};

void run_score(const ScoreArgs& args) {
  std::ifstream rf(args.ref_rttm);
  if (!rf) throw std::runtime_error("cannot open " + args.ref_rttm);
  const auto refs = read_rttm(rf);
  if (!args.hyp_rttm.empty()) {
    std::ifstream hf(args.hyp_rttm);
    if (!hf) throw std::runtime_error("cannot open " + args.hyp_rttm);
    const auto hyps = read_rttm(hf);
    // Score only reference meetings that have a hypothesis file entry when
    // the hypothesis covers a subset; missing meetings score as all-error.
    std::vector<Timeline> scored_refs;
    for (const auto& r : refs) {
      for (const auto& h : hyps) {
        if (h.meeting_id == r.meeting_id) {
          scored_refs.push_back(r);
          break;
        }
      }
    }
    const ScoreReport report = compute_ser(scored_refs.empty() ? refs : scored_refs, hyps,
                                           args.collar, args.ignore_overlap);
    char buf[160];
    for (const auto& m : report.meetings) {
      std::snprintf(buf, sizeof(buf), "meeting %s scored %.3f error %.3f ser %.2f%%",
                    m.meeting_id.c_str(), m.scored_time, m.speaker_error_time, 100.0 * m.ser);
      std::cout << buf << '\n';
    }
    std::snprintf(buf, sizeof(buf), "total scored %.3f error %.3f ser %.2f%%",
                  report.scored_time, report.speaker_error_time, 100.0 * report.ser);
    std::cout << buf << '\n';
  }
  if (!args.traj_path.empty()) {
    const LabelTrajectory traj = read_trajectory_file(args.traj_path);
    const Timeline* ref = nullptr;
    for (const auto& r : refs) {
      if (r.meeting_id == traj.meeting_id) {
        ref = &r;
        break;
      }
    }
    if (!ref) {
      throw std::runtime_error("score: no reference for meeting '" + traj.meeting_id + "'");
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "window-accuracy %.4f", window_accuracy(traj, *ref));
    std::cout << buf << '\n';
  }
}

// ---- sweep-median ----

struct SweepArgs {
  IdentifyArgs identify;
  std::string ref_rttm;
  double collar = 0.25;
  bool ignore_overlap = true;
  int max_taps = 7;
};

void run_sweep(const SweepArgs& args) {
  if (args.max_taps < 1 || args.max_taps % 2 == 0) {
    throw std::runtime_error("sweep-median: --max-taps must be odd and >= 1");
  }
  std::ifstream rf(args.ref_rttm);
  if (!rf) throw std::runtime_error("cannot open " + args.ref_rttm);
  const auto refs = read_rttm(rf);

  IdentifyArgs base = args.identify;
  base.taps = 1;
  const LabelTrajectory raw = identify_trajectory(base);
  const Timeline* ref = nullptr;
  for (const auto& r : refs) {
    if (r.meeting_id == raw.meeting_id) ref = &r;
  }
  if (!ref) throw std::runtime_error("sweep-median: no reference for '" + raw.meeting_id + "'");

  char buf[96];
  for (int taps = 1; taps <= args.max_taps; taps += 2) {
    const LabelTrajectory traj =
        taps == 1 ? raw
                  : (args.identify.mode_filter ? mode_smooth(raw, taps) : median_smooth(raw, taps));
    const Timeline hyp = trajectory_to_segments(traj);
    const ScoreReport report = compute_ser(*ref, hyp, args.collar, args.ignore_overlap);
    std::snprintf(buf, sizeof(buf), "taps %d ser %.2f%% accuracy %.4f", taps,
                  100.0 * report.ser, window_accuracy(traj, *ref));
    std::cout << buf << '\n';
  }
}

}  // namespace

int main(int argc, char* argv[]) {
  CLI::App app{"continuous speaker identification over embedding streams"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--config", synth_args.config_path, "experiment config (json)");
  synth->add_option("--out", synth_args.out_dir, "output directory")->required();
  synth->add_option("--seed", synth_args.seed, "override config seed");
  synth->callback([&synth_args] { run_synth(synth_args); });

  FitBackendArgs fit_args;
  auto* fit = app.add_subcommand("fit-backend", "fit an LDA projection from labeled embeddings");
  fit->add_option("--input", fit_args.input, "labeled embedding archive")->required();
  fit->add_option("--output", fit_args.output, "projection model path")->required();
  fit->add_option("--dim", fit_args.dim, "output dimensionality (default: keep)");
  fit->callback([&fit_args] { run_fit_backend(fit_args); });

  EnrollArgs enroll_args;
  auto* enroll = app.add_subcommand("enroll", "estimate speaker profiles from enrollment draws");
  enroll->add_option("--input", enroll_args.input, "enrollment archive")->required();
  enroll->add_option("--output", enroll_args.output, "profile archive path")->required();
  enroll->add_option("--projection", enroll_args.projection, "projection model to apply");
  enroll->callback([&enroll_args] { run_enroll(enroll_args); });

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train the identifier on a labeled pool");
  train_cmd->add_option("--config", train_args.config_path, "experiment config (json)");
  train_cmd->add_option("--train", train_args.train_archive, "labeled window archive")->required();
  train_cmd->add_option("--profiles", train_args.profiles_archive, "profile archive")->required();
  train_cmd->add_option("--projection", train_args.projection, "projection model to apply");
  train_cmd->add_option("--out", train_args.out_checkpoint, "checkpoint path")->required();
  train_cmd->add_option("--log", train_args.log_path, "loss log path (default: <out>.log)");
  train_cmd->add_option("--seq-len-range", train_args.seq_len_range,
                        "profile count range MIN:MAX");
  train_cmd->add_option("--context", train_args.context, "context windows per side");
  train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
  train_cmd->add_option("--examples", train_args.examples, "generated example count");
  train_cmd->add_option("--lr", train_args.learning_rate, "learning rate");
  train_cmd->add_option("--seed", train_args.seed, "training + init seed");
  train_cmd->add_option("--cell", train_args.cell, "cell kind: rmc or lstm");
  train_cmd->callback([&train_args] { run_train(train_args); });

  IdentifyArgs id_args;
  auto* identify = app.add_subcommand("identify", "label every window of a meeting");
  identify->add_option("--system", id_args.system, "cosine or rmc")->required();
  identify->add_option("--checkpoint", id_args.checkpoint, "model checkpoint (rmc)");
  identify->add_option("--meeting", id_args.meeting_archive, "meeting window archive")->required();
  identify->add_option("--profiles", id_args.profiles_archive, "profile archive")->required();
  identify->add_option("--projection", id_args.projection, "projection model to apply");
  identify->add_option("--context", id_args.context, "context windows per side (rmc)");
  identify->add_option("--taps", id_args.taps, "median filter taps (odd)");
  identify->add_flag("--mode-filter", id_args.mode_filter,
                     "majority vote instead of median");
  identify->add_option("--out-rttm", id_args.out_rttm, "hypothesis RTTM path");
  identify->add_option("--out-traj", id_args.out_traj, "window trajectory path");
  identify->callback([&id_args] { run_identify(id_args); });

  ScoreArgs score_args;
  auto* score = app.add_subcommand("score", "speaker error rate and window accuracy");
  score->add_option("--ref", score_args.ref_rttm, "reference RTTM")->required();
  score->add_option("--hyp", score_args.hyp_rttm, "hypothesis RTTM");
  score->add_option("--traj", score_args.traj_path, "trajectory file for window accuracy");
  score->add_option("--collar", score_args.collar, "no-score collar around boundaries (s)");
  score->add_flag("--ignore-overlap,!--score-overlap", score_args.ignore_overlap,
                  "exclude overlapped reference speech (default on)");
  score->callback([&score_args] { run_score(score_args); });

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep-median", "score a meeting across median taps");
  sweep->add_option("--system", sweep_args.identify.system, "cosine or rmc")->required();
  sweep->add_option("--checkpoint", sweep_args.identify.checkpoint, "model checkpoint (rmc)");
  sweep->add_option("--meeting", sweep_args.identify.meeting_archive, "meeting window archive")
      ->required();
  sweep->add_option("--profiles", sweep_args.identify.profiles_archive, "profile archive")
      ->required();
  sweep->add_option("--projection", sweep_args.identify.projection, "projection model");
  sweep->add_option("--context", sweep_args.identify.context, "context windows per side");
  sweep->add_flag("--mode-filter", sweep_args.identify.mode_filter,
                  "majority vote instead of median");
  sweep->add_option("--ref", sweep_args.ref_rttm, "reference RTTM")->required();
  sweep->add_option("--collar", sweep_args.collar, "no-score collar (s)");
  sweep->add_option("--max-taps", sweep_args.max_taps, "largest odd tap count");
  sweep->callback([&sweep_args] { run_sweep(sweep_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "spkid: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
