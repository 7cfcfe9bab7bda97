// tests/test_cli.cpp

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

// End-to-end checks of the command line tool.  Each test drives the real
// binary (path injected by the build as SPKID_TOOL_PATH) through a scratch
// directory under the system temp path.

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
  REQUIRE(os.good());
}

// Runs the tool with the given argument string, capturing exit code and both
// output streams via shell redirection.
RunResult run_tool(const fs::path& dir, const std::string& args) {
  const fs::path out_path = dir / "run_stdout.txt";
  const fs::path err_path = dir / "run_stderr.txt";
  std::string cmd = std::string("\"") + SPKID_TOOL_PATH + "\" " + args + " > \"" +
                    out_path.string() + "\" 2> \"" + err_path.string() + "\"";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  if (raw == -1) {
    r.exit_code = -1;
  } else if (WIFEXITED(raw)) {
    r.exit_code = WEXITSTATUS(raw);
  } else {
    r.exit_code = -2;
  }
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

fs::path make_workspace(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("spkid_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int count_lines_with_prefix(const std::string& text, const std::string& prefix) {
  int n = 0;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind(prefix, 0) == 0) ++n;
  }
  return n;
}

// A noiseless corpus: speaker draws equal the speaker mean, no channel.
// Silences are kept at 0.4s or longer so that hypothesis boundaries, which
// fall at midpoints between window centers, always land inside silence.
const char* kNoiselessConfig = R"({
  "seed": 11,
  "corpus": {
    "dim": 8,
    "n_speakers": 4,
    "eval_speakers": 3,
    "meeting_speakers": 3,
    "speaker_sigma": 0.0,
    "utterances_per_speaker": 2,
    "windows_per_utterance": 4,
    "enroll_draws": 3,
    "meetings": 1,
    "turns_per_meeting": 8,
    "turn_min": 1.6,
    "turn_max": 5.0,
    "silence_min": 0.4,
    "silence_max": 0.8,
    "channel": {"enabled": false}
  },
  "window": {"length": 1.5, "shift": 0.75}
})";

}  // namespace

TEST_CASE("cosine pipeline scores a noiseless meeting perfectly", "[cli]") {
  const fs::path dir = make_workspace("cosine");
  write_text(dir / "config.json", kNoiselessConfig);

  auto synth = run_tool(dir, "synth --config \"" + (dir / "config.json").string() +
                                 "\" --out \"" + dir.string() + "\"");
  CAPTURE(synth.err);
  REQUIRE(synth.exit_code == 0);
  REQUIRE(synth.out.find("synth: wrote 4 train speakers, 1 meetings") != std::string::npos);
  for (const char* name : {"train.xvec", "train.enroll.xvec", "ref.rttm",
                           "meeting-0.xvec", "meeting-0.enroll.xvec", "config.json"}) {
    REQUIRE(fs::exists(dir / name));
  }
  // The resolved config echoes every section.
  const std::string resolved = slurp(dir / "config.json");
  REQUIRE(resolved.find("\"corpus\"") != std::string::npos);
  REQUIRE(resolved.find("\"window\"") != std::string::npos);

  auto enroll = run_tool(dir, "enroll --input \"" + (dir / "meeting-0.enroll.xvec").string() +
                                  "\" --output \"" + (dir / "profiles.xvec").string() + "\"");
  CAPTURE(enroll.err);
  REQUIRE(enroll.exit_code == 0);
  REQUIRE(enroll.out.find("enroll: 3 profiles from 9 draws") != std::string::npos);

  auto identify = run_tool(
      dir, "identify --system cosine --meeting \"" + (dir / "meeting-0.xvec").string() +
               "\" --profiles \"" + (dir / "profiles.xvec").string() + "\" --out-rttm \"" +
               (dir / "hyp.rttm").string() + "\" --out-traj \"" +
               (dir / "traj.txt").string() + "\"");
  CAPTURE(identify.err);
  REQUIRE(identify.exit_code == 0);
  REQUIRE(identify.out.find("identify:") != std::string::npos);
  REQUIRE(identify.out.find("(cosine, taps 1)") != std::string::npos);
  REQUIRE(fs::exists(dir / "hyp.rttm"));
  REQUIRE(fs::exists(dir / "traj.txt"));

  auto score = run_tool(dir, "score --ref \"" + (dir / "ref.rttm").string() + "\" --hyp \"" +
                                 (dir / "hyp.rttm").string() + "\" --traj \"" +
                                 (dir / "traj.txt").string() + "\" --collar 0");
  CAPTURE(score.out, score.err);
  REQUIRE(score.exit_code == 0);
  REQUIRE(score.out.find("meeting meeting-0") != std::string::npos);
  REQUIRE(score.out.find("ser 0.00%") != std::string::npos);
  REQUIRE(score.out.find("error 0.000") != std::string::npos);
  REQUIRE(score.out.find("window-accuracy 1.0000") != std::string::npos);

  fs::remove_all(dir);
}

TEST_CASE("training produces a checkpoint the identify command accepts", "[cli]") {
  const fs::path dir = make_workspace("train");
  const std::string config = R"({
    "seed": 5,
    "corpus": {
      "dim": 8,
      "n_speakers": 4,
      "eval_speakers": 3,
      "meeting_speakers": 3,
      "speaker_sigma": 0.05,
      "utterances_per_speaker": 2,
      "windows_per_utterance": 4,
      "enroll_draws": 3,
      "meetings": 1,
      "turns_per_meeting": 6,
      "turn_min": 1.6,
      "turn_max": 4.0,
      "silence_min": 0.4,
      "silence_max": 0.8,
      "channel": {"enabled": false}
    },
    "model": {
      "cell": "rmc",
      "n_max": 3,
      "slot_width": 8,
      "heads": 2,
      "attention_mlp_width": 8,
      "mlp_head_layers": 2,
      "mlp_head_width": 16
    },
    "training": {
      "learning_rate": 0.002,
      "batch_size": 8,
      "epochs": 2,
      "seq_len_min": 2,
      "seq_len_max": 3,
      "examples": 32,
      "context": 1
    }
  })";
  write_text(dir / "config.json", config);

  auto synth = run_tool(dir, "synth --config \"" + (dir / "config.json").string() +
                                 "\" --out \"" + dir.string() + "\"");
  CAPTURE(synth.err);
  REQUIRE(synth.exit_code == 0);

  auto train_enroll =
      run_tool(dir, "enroll --input \"" + (dir / "train.enroll.xvec").string() +
                        "\" --output \"" + (dir / "train_profiles.xvec").string() + "\"");
  CAPTURE(train_enroll.err);
  REQUIRE(train_enroll.exit_code == 0);
  REQUIRE(train_enroll.out.find("enroll: 4 profiles from 12 draws") != std::string::npos);

  auto train = run_tool(dir, "train --config \"" + (dir / "config.json").string() +
                                 "\" --train \"" + (dir / "train.xvec").string() +
                                 "\" --profiles \"" + (dir / "train_profiles.xvec").string() +
                                 "\" --out \"" + (dir / "model.ckpt").string() + "\"");
  CAPTURE(train.out, train.err);
  REQUIRE(train.exit_code == 0);
  REQUIRE(train.out.find("epoch 0 loss") != std::string::npos);
  REQUIRE(train.out.find("epoch 1 loss") != std::string::npos);
  REQUIRE(train.out.find("train: wrote") != std::string::npos);
  REQUIRE(fs::exists(dir / "model.ckpt"));
  REQUIRE(fs::exists(dir / "model.ckpt.log"));

  auto enroll = run_tool(dir, "enroll --input \"" + (dir / "meeting-0.enroll.xvec").string() +
                                  "\" --output \"" + (dir / "profiles.xvec").string() + "\"");
  REQUIRE(enroll.exit_code == 0);

  auto identify = run_tool(
      dir, "identify --system rmc --checkpoint \"" + (dir / "model.ckpt").string() +
               "\" --meeting \"" + (dir / "meeting-0.xvec").string() + "\" --profiles \"" +
               (dir / "profiles.xvec").string() + "\" --context 1 --taps 3 --out-rttm \"" +
               (dir / "hyp.rttm").string() + "\"");
  CAPTURE(identify.out, identify.err);
  REQUIRE(identify.exit_code == 0);
  REQUIRE(identify.out.find("(rmc, taps 3)") != std::string::npos);
  REQUIRE(fs::exists(dir / "hyp.rttm"));

  // Scoring the trained system must run even if its error is not zero.
  auto score = run_tool(dir, "score --ref \"" + (dir / "ref.rttm").string() + "\" --hyp \"" +
                                 (dir / "hyp.rttm").string() + "\"");
  CAPTURE(score.out, score.err);
  REQUIRE(score.exit_code == 0);
  REQUIRE(score.out.find("total scored") != std::string::npos);

  fs::remove_all(dir);
}

TEST_CASE("synthesis is byte reproducible for a fixed seed", "[cli]") {
  const fs::path dir = make_workspace("determinism");
  write_text(dir / "config.json", kNoiselessConfig);
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");

  auto first = run_tool(dir, "synth --config \"" + (dir / "config.json").string() +
                                 "\" --out \"" + (dir / "a").string() + "\"");
  REQUIRE(first.exit_code == 0);
  auto second = run_tool(dir, "synth --config \"" + (dir / "config.json").string() +
                                  "\" --out \"" + (dir / "b").string() + "\"");
  REQUIRE(second.exit_code == 0);

  for (const char* name : {"train.xvec", "train.enroll.xvec", "meeting-0.xvec",
                           "meeting-0.enroll.xvec", "ref.rttm"}) {
    CAPTURE(name);
    REQUIRE(slurp(dir / "a" / name) == slurp(dir / "b" / name));
  }
  // A different seed must change the corpus.
  std::string other = kNoiselessConfig;
  other.replace(other.find("\"seed\": 11"), 10, "\"seed\": 12");
  write_text(dir / "config2.json", other);
  fs::create_directories(dir / "c");
  auto third = run_tool(dir, "synth --config \"" + (dir / "config2.json").string() +
                                 "\" --out \"" + (dir / "c").string() + "\"");
  REQUIRE(third.exit_code == 0);
  REQUIRE(slurp(dir / "a" / "meeting-0.xvec") != slurp(dir / "c" / "meeting-0.xvec"));

  fs::remove_all(dir);
}

TEST_CASE("sweep-median reports one row per odd tap count", "[cli]") {
  const fs::path dir = make_workspace("sweep");
  write_text(dir / "config.json", kNoiselessConfig);
  auto synth = run_tool(dir, "synth --config \"" + (dir / "config.json").string() +
                                 "\" --out \"" + dir.string() + "\"");
  REQUIRE(synth.exit_code == 0);
  auto enroll = run_tool(dir, "enroll --input \"" + (dir / "meeting-0.enroll.xvec").string() +
                                  "\" --output \"" + (dir / "profiles.xvec").string() + "\"");
  REQUIRE(enroll.exit_code == 0);

  auto sweep = run_tool(
      dir, "sweep-median --system cosine --meeting \"" + (dir / "meeting-0.xvec").string() +
               "\" --profiles \"" + (dir / "profiles.xvec").string() + "\" --ref \"" +
               (dir / "ref.rttm").string() + "\" --max-taps 7");
  CAPTURE(sweep.out, sweep.err);
  REQUIRE(sweep.exit_code == 0);
  REQUIRE(count_lines_with_prefix(sweep.out, "taps ") == 4);
  REQUIRE(sweep.out.find("taps 1 ") != std::string::npos);
  REQUIRE(sweep.out.find("taps 7 ") != std::string::npos);

  auto bad = run_tool(
      dir, "sweep-median --system cosine --meeting \"" + (dir / "meeting-0.xvec").string() +
               "\" --profiles \"" + (dir / "profiles.xvec").string() + "\" --ref \"" +
               (dir / "ref.rttm").string() + "\" --max-taps 4");
  REQUIRE(bad.exit_code != 0);

  fs::remove_all(dir);
}

TEST_CASE("projection fitting feeds back into enrollment", "[cli]") {
  const fs::path dir = make_workspace("projection");
  // Within-class scatter must be nonzero for the discriminant fit, so this
  // corpus draws with spread, unlike the noiseless one.
  std::string config = kNoiselessConfig;
  config.replace(config.find("\"speaker_sigma\": 0.0"), 20, "\"speaker_sigma\": 0.1");
  write_text(dir / "config.json", config);
  auto synth = run_tool(dir, "synth --config \"" + (dir / "config.json").string() +
                                 "\" --out \"" + dir.string() + "\"");
  REQUIRE(synth.exit_code == 0);

  auto fit = run_tool(dir, "fit-backend --input \"" + (dir / "train.xvec").string() +
                               "\" --output \"" + (dir / "backend.xprj").string() +
                               "\" --dim 3");
  CAPTURE(fit.out, fit.err);
  REQUIRE(fit.exit_code == 0);
  REQUIRE(fit.out.find("fit-backend:") != std::string::npos);
  REQUIRE(fs::exists(dir / "backend.xprj"));

  auto enroll = run_tool(dir, "enroll --input \"" + (dir / "meeting-0.enroll.xvec").string() +
                                  "\" --output \"" + (dir / "profiles.xvec").string() +
                                  "\" --projection \"" + (dir / "backend.xprj").string() + "\"");
  CAPTURE(enroll.err);
  REQUIRE(enroll.exit_code == 0);
  REQUIRE(enroll.out.find("enroll: 3 profiles") != std::string::npos);

  fs::remove_all(dir);
}

TEST_CASE("errors surface as nonzero exit codes", "[cli]") {
  const fs::path dir = make_workspace("errors");

  // Runtime failure: unreadable input file.
  auto enroll = run_tool(dir, "enroll --input \"" + (dir / "missing.xvec").string() +
                                  "\" --output \"" + (dir / "out.xvec").string() + "\"");
  REQUIRE(enroll.exit_code == 1);
  REQUIRE(enroll.err.find("spkid: error:") != std::string::npos);

  // The rmc system refuses to run without a checkpoint.
  write_text(dir / "config.json", kNoiselessConfig);
  auto synth = run_tool(dir, "synth --config \"" + (dir / "config.json").string() +
                                 "\" --out \"" + dir.string() + "\"");
  REQUIRE(synth.exit_code == 0);
  auto enroll_ok =
      run_tool(dir, "enroll --input \"" + (dir / "meeting-0.enroll.xvec").string() +
                        "\" --output \"" + (dir / "profiles.xvec").string() + "\"");
  REQUIRE(enroll_ok.exit_code == 0);
  auto identify = run_tool(
      dir, "identify --system rmc --meeting \"" + (dir / "meeting-0.xvec").string() +
               "\" --profiles \"" + (dir / "profiles.xvec").string() + "\"");
  REQUIRE(identify.exit_code == 1);
  REQUIRE(identify.err.find("spkid: error:") != std::string::npos);
  REQUIRE(identify.err.find("checkpoint") != std::string::npos);

  // Parse failure: a missing required option.
  auto no_out = run_tool(dir, "synth --config \"" + (dir / "config.json").string() + "\"");
  REQUIRE(no_out.exit_code != 0);

  // A bad config key is reported with its full path.
  write_text(dir / "bad.json", "{\"corpus\": {\"bogus\": 1}}");
  auto bad_cfg = run_tool(dir, "synth --config \"" + (dir / "bad.json").string() +
                                   "\" --out \"" + dir.string() + "\"");
  REQUIRE(bad_cfg.exit_code == 1);
  REQUIRE(bad_cfg.err.find("corpus.bogus") != std::string::npos);

  fs::remove_all(dir);
}
