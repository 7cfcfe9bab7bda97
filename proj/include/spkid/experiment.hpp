// spkid/experiment.hpp

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

// Experiment configuration document (JSON). Unknown keys are rejected so a
// typo cannot silently fall back to a default; every duration is in
// seconds, every size is a count. The tools overlay CLI flags on top and
// echo the resolved document next to their outputs.

#ifndef SPKID_EXPERIMENT_HPP_
#define SPKID_EXPERIMENT_HPP_

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spkid/rmc.hpp"
#include "spkid/trainer.hpp"

namespace spkid {

struct ExperimentConfig {
  std::uint64_t seed = 0;

  // Synthetic corpus. Train speakers feed the example pool; eval speakers
  // are a disjoint set that only appears in meetings.
  int dim = 32;
  int n_speakers = 8;
  int eval_speakers = 4;
  int meeting_speakers = 4;  // participants drawn per meeting
  double speaker_sigma = 0.3;
  int utterances_per_speaker = 4;
  int windows_per_utterance = 8;
  int enroll_draws = 10;
  int meetings = 1;
  int turns_per_meeting = 20;
  double turn_min = 1.5;
  double turn_max = 12.0;
  double silence_min = 0.05;
  double silence_max = 1.5;
  bool channel_enabled = false;
  double channel_strength = 0.6;
  double channel_noise = 0.1;

  // Windowing (seconds).
  double window_length = 1.5;
  double window_shift = 0.75;
  double merge_gap = 0.5;

  // Scoring.
  double collar = 0.25;
  bool ignore_overlap = true;

  // Identification.
  int context = 1;
  int taps = 1;

  // Model & training.
  CellKind cell = CellKind::kRmc;
  RmcConfig model;
  TrainingConfig training;
  int training_examples = 2000;
};

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::string& path,
                       std::initializer_list<const char*> known) {
  if (!obj.is_object()) {
    throw std::runtime_error("config: '" + path + "' must be an object");
  }
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) {
      if (key == k) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw std::runtime_error("config: unknown key '" +
                               (path.empty() ? key : path + "." + key) + "'");
    }
  }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::check_keys(j, "", {"seed", "corpus", "window", "scoring", "identify", "model",
                             "training"});
  c.seed = j.value("seed", c.seed);

  if (j.contains("corpus")) {
    const auto& s = j.at("corpus");
    detail::check_keys(s, "corpus",
                       {"dim", "n_speakers", "eval_speakers", "meeting_speakers",
                        "speaker_sigma", "utterances_per_speaker", "windows_per_utterance",
                        "enroll_draws", "meetings", "turns_per_meeting", "turn_min",
                        "turn_max", "silence_min", "silence_max", "channel"});
    c.dim = s.value("dim", c.dim);
    c.n_speakers = s.value("n_speakers", c.n_speakers);
    c.eval_speakers = s.value("eval_speakers", c.eval_speakers);
    c.meeting_speakers = s.value("meeting_speakers", c.meeting_speakers);
    c.speaker_sigma = s.value("speaker_sigma", c.speaker_sigma);
    c.utterances_per_speaker = s.value("utterances_per_speaker", c.utterances_per_speaker);
    c.windows_per_utterance = s.value("windows_per_utterance", c.windows_per_utterance);
    c.enroll_draws = s.value("enroll_draws", c.enroll_draws);
    c.meetings = s.value("meetings", c.meetings);
    c.turns_per_meeting = s.value("turns_per_meeting", c.turns_per_meeting);
    c.turn_min = s.value("turn_min", c.turn_min);
    c.turn_max = s.value("turn_max", c.turn_max);
    c.silence_min = s.value("silence_min", c.silence_min);
    c.silence_max = s.value("silence_max", c.silence_max);
    if (s.contains("channel")) {
      const auto& ch = s.at("channel");
      detail::check_keys(ch, "corpus.channel", {"enabled", "strength", "noise_sigma"});
      c.channel_enabled = ch.value("enabled", c.channel_enabled);
      c.channel_strength = ch.value("strength", c.channel_strength);
      c.channel_noise = ch.value("noise_sigma", c.channel_noise);
    }
  }

  if (j.contains("window")) {
    const auto& s = j.at("window");
    detail::check_keys(s, "window", {"length", "shift", "merge_gap"});
    c.window_length = s.value("length", c.window_length);
    c.window_shift = s.value("shift", c.window_shift);
    c.merge_gap = s.value("merge_gap", c.merge_gap);
  }

  if (j.contains("scoring")) {
    const auto& s = j.at("scoring");
    detail::check_keys(s, "scoring", {"collar", "ignore_overlap"});
    c.collar = s.value("collar", c.collar);
    c.ignore_overlap = s.value("ignore_overlap", c.ignore_overlap);
  }

  if (j.contains("identify")) {
    const auto& s = j.at("identify");
    detail::check_keys(s, "identify", {"context", "taps"});
    c.context = s.value("context", c.context);
    c.taps = s.value("taps", c.taps);
  }

  if (j.contains("model")) {
    const auto& s = j.at("model");
    detail::check_keys(s, "model",
                       {"cell", "n_max", "input_dim", "slot_width", "heads", "memory_slots",
                        "attention_mlp_width", "mlp_head_layers", "mlp_head_width", "seed"});
    const std::string cell = s.value("cell", std::string("rmc"));
    if (cell == "rmc") {
      c.cell = CellKind::kRmc;
    } else if (cell == "lstm") {
      c.cell = CellKind::kLstm;
    } else {
      throw std::runtime_error("config: model.cell must be 'rmc' or 'lstm'");
    }
    c.model.n_max = s.value("n_max", c.model.n_max);
    c.model.input_dim = s.value("input_dim", c.model.input_dim);
    c.model.slot_width = s.value("slot_width", c.model.slot_width);
    c.model.heads = s.value("heads", c.model.heads);
    c.model.memory_slots = s.value("memory_slots", c.model.memory_slots);
    c.model.attention_mlp_width = s.value("attention_mlp_width", c.model.attention_mlp_width);
    c.model.mlp_head_layers = s.value("mlp_head_layers", c.model.mlp_head_layers);
    c.model.mlp_head_width = s.value("mlp_head_width", c.model.mlp_head_width);
    c.model.seed = s.value("seed", c.model.seed);
  }

  if (j.contains("training")) {
    const auto& s = j.at("training");
    detail::check_keys(s, "training",
                       {"learning_rate", "batch_size", "epochs", "optimizer", "adam_beta1",
                        "adam_beta2", "adam_eps", "seq_len_min", "seq_len_max", "context",
                        "seed", "permute_augmentation", "examples"});
    c.training.learning_rate = s.value("learning_rate", c.training.learning_rate);
    c.training.batch_size = s.value("batch_size", c.training.batch_size);
    c.training.epochs = s.value("epochs", c.training.epochs);
    const std::string opt = s.value("optimizer", std::string("adam"));
    if (opt == "adam") {
      c.training.optimizer = OptimizerKind::kAdam;
    } else if (opt == "sgd") {
      c.training.optimizer = OptimizerKind::kSgd;
    } else {
      throw std::runtime_error("config: training.optimizer must be 'adam' or 'sgd'");
    }
    c.training.adam_beta1 = s.value("adam_beta1", c.training.adam_beta1);
    c.training.adam_beta2 = s.value("adam_beta2", c.training.adam_beta2);
    c.training.adam_eps = s.value("adam_eps", c.training.adam_eps);
    c.training.seq_len_min = s.value("seq_len_min", c.training.seq_len_min);
    c.training.seq_len_max = s.value("seq_len_max", c.training.seq_len_max);
    c.training.context = s.value("context", c.training.context);
    c.training.seed = s.value("seed", c.training.seed);
    c.training.permute_augmentation =
        s.value("permute_augmentation", c.training.permute_augmentation);
    c.training_examples = s.value("examples", c.training_examples);
  }
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["corpus"] = {{"dim", c.dim},
                 {"n_speakers", c.n_speakers},
                 {"eval_speakers", c.eval_speakers},
                 {"meeting_speakers", c.meeting_speakers},
                 {"speaker_sigma", c.speaker_sigma},
                 {"utterances_per_speaker", c.utterances_per_speaker},
                 {"windows_per_utterance", c.windows_per_utterance},
                 {"enroll_draws", c.enroll_draws},
                 {"meetings", c.meetings},
                 {"turns_per_meeting", c.turns_per_meeting},
                 {"turn_min", c.turn_min},
                 {"turn_max", c.turn_max},
                 {"silence_min", c.silence_min},
                 {"silence_max", c.silence_max},
                 {"channel",
                  {{"enabled", c.channel_enabled},
                   {"strength", c.channel_strength},
                   {"noise_sigma", c.channel_noise}}}};
  j["window"] = {{"length", c.window_length}, {"shift", c.window_shift},
                 {"merge_gap", c.merge_gap}};
  j["scoring"] = {{"collar", c.collar}, {"ignore_overlap", c.ignore_overlap}};
  j["identify"] = {{"context", c.context}, {"taps", c.taps}};
  j["model"] = {{"cell", c.cell == CellKind::kRmc ? "rmc" : "lstm"},
                {"n_max", c.model.n_max},
                {"input_dim", c.model.input_dim},
                {"slot_width", c.model.slot_width},
                {"heads", c.model.heads},
                {"memory_slots", c.model.memory_slots},
                {"attention_mlp_width", c.model.attention_mlp_width},
                {"mlp_head_layers", c.model.mlp_head_layers},
                {"mlp_head_width", c.model.mlp_head_width},
                {"seed", c.model.seed}};
  j["training"] = {
      {"learning_rate", c.training.learning_rate},
      {"batch_size", c.training.batch_size},
      {"epochs", c.training.epochs},
      {"optimizer", c.training.optimizer == OptimizerKind::kAdam ? "adam" : "sgd"},
      {"adam_beta1", c.training.adam_beta1},
      {"adam_beta2", c.training.adam_beta2},
      {"adam_eps", c.training.adam_eps},
      {"seq_len_min", c.training.seq_len_min},
      {"seq_len_max", c.training.seq_len_max},
      {"context", c.training.context},
      {"seed", c.training.seed},
      {"permute_augmentation", c.training.permute_augmentation},
      {"examples", c.training_examples}};
  return j;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config: " + path + ": " + e.what());
  }
  return config_from_json(j);
}

// Writes the fully resolved document (defaults + file + flag overrides) so
// every output directory records what produced it.
inline void save_resolved_config(const std::string& path, const ExperimentConfig& c) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("config: cannot write " + path);
  os << config_to_json(c).dump(2) << '\n';
}

}  // namespace spkid

#endif  // SPKID_EXPERIMENT_HPP_
