// spkid/timeline.hpp

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

#ifndef SPKID_TIMELINE_HPP_
#define SPKID_TIMELINE_HPP_

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace spkid {

struct Segment {
  double start = 0.0;
  double end = 0.0;
  std::string speaker;  // empty = no speaker attribution

  double length() const { return end - start; }
};

// Speech segments of one meeting, sorted by start time. Reference timelines
// additionally keep same-speaker segments disjoint.
struct Timeline {
  std::string meeting_id;
  std::vector<Segment> segments;
};

struct TrajectoryEntry {
  double start = 0.0;
  double end = 0.0;
  int label = -1;                // index into speaker_ids
  Eigen::VectorXd posterior;     // optional; empty when unavailable
};

// Per-window predicted labels for one meeting. speaker_ids maps a label
// index back to the enrolled identity.
struct LabelTrajectory {
  std::string meeting_id;
  std::vector<std::string> speaker_ids;
  std::vector<TrajectoryEntry> entries;
};

struct MeetingScore {
  std::string meeting_id;
  double scored_time = 0.0;
  double speaker_error_time = 0.0;
  double ser = 0.0;
};

struct ScoreReport {
  double scored_time = 0.0;
  double speaker_error_time = 0.0;
  double ser = 0.0;
  std::vector<MeetingScore> meetings;
};

namespace detail {

inline void require_sorted(const Timeline& t, const char* who) {
  for (std::size_t i = 0; i < t.segments.size(); ++i) {
    const auto& s = t.segments[i];
    if (!(s.end > s.start) || !std::isfinite(s.start) || !std::isfinite(s.end)) {
      throw std::invalid_argument(std::string(who) + ": invalid segment bounds");
    }
    if (i > 0 && t.segments[i - 1].start > s.start) {
      throw std::invalid_argument(std::string(who) + ": segments not sorted by start");
    }
  }
}

}  // namespace detail

// Merges consecutive segments whose inter-gap is strictly below `gap`
// (transitively). Speaker ids survive only when every merged piece agrees;
// mixed-speaker merges drop the id, which is exactly the oracle-VAD view.
inline Timeline merge_segments(const Timeline& input, double gap) {
  if (gap < 0.0) throw std::invalid_argument("merge_segments: negative gap");
  detail::require_sorted(input, "merge_segments");
  Timeline out;
  out.meeting_id = input.meeting_id;
  for (const auto& seg : input.segments) {
    if (!out.segments.empty() && seg.start - out.segments.back().end < gap) {
      Segment& last = out.segments.back();
      last.end = std::max(last.end, seg.end);
      if (last.speaker != seg.speaker) last.speaker.clear();
    } else {
      out.segments.push_back(seg);
    }
  }
  return out;
}

struct WindowSpan {
  double start = 0.0;
  double end = 0.0;
  int segment_index = -1;
};

// Sliding analysis windows over each segment. Segments shorter than `win`
// yield one whole-segment window. A tail longer than shift/2 gets a
// flush-right window of full length; a shorter tail is absorbed into the
// last window so every instant stays covered.
inline std::vector<WindowSpan> window_segments(const Timeline& t, double win,
                                               double shift) {
  if (!(win > 0.0) || !(shift > 0.0) || shift > win) {
    throw std::invalid_argument("window_segments: require win > 0 and 0 < shift <= win");
  }
  detail::require_sorted(t, "window_segments");
  std::vector<WindowSpan> out;
  for (std::size_t si = 0; si < t.segments.size(); ++si) {
    const auto& seg = t.segments[si];
    const double len = seg.length();
    if (len <= win) {
      out.push_back({seg.start, seg.end, static_cast<int>(si)});
      continue;
    }
    const int k_max = static_cast<int>(std::floor((len - win) / shift + 1e-9));
    for (int k = 0; k <= k_max; ++k) {
      out.push_back({seg.start + k * shift, seg.start + k * shift + win,
                     static_cast<int>(si)});
    }
    const double tail = seg.end - out.back().end;
    if (tail > shift / 2.0) {
      out.push_back({seg.end - win, seg.end, static_cast<int>(si)});
    } else if (tail > 0.0) {
      out.back().end = seg.end;
    }
  }
  return out;
}

// Converts windowed label decisions into a speech timeline. Each instant
// between the first window start and the last window end takes the label of
// the window whose center is nearest (earlier window on ties), i.e. segment
// boundaries between overlapping windows fall at center midpoints. With
// frame_resolution > 0 time is instead tiled into frames of that width and
// each frame votes as one unit.
inline Timeline trajectory_to_segments(const LabelTrajectory& traj,
                                       double frame_resolution = 0.0) {
  Timeline out;
  out.meeting_id = traj.meeting_id;
  if (traj.entries.empty()) return out;

  std::vector<const TrajectoryEntry*> wins;
  wins.reserve(traj.entries.size());
  double t0 = traj.entries.front().start, t1 = traj.entries.front().end;
  for (const auto& e : traj.entries) {
    if (!(e.end > e.start)) throw std::invalid_argument("trajectory_to_segments: bad window");
    if (e.label < 0 || e.label >= static_cast<int>(traj.speaker_ids.size())) {
      throw std::invalid_argument("trajectory_to_segments: label out of range");
    }
    t0 = std::min(t0, e.start);
    t1 = std::max(t1, e.end);
    wins.push_back(&e);
  }
  std::stable_sort(wins.begin(), wins.end(), [](const auto* a, const auto* b) {
    return a->start + a->end < b->start + b->end;  // order by center, ties keep time order
  });

  auto emit = [&out, &traj](double s, double e, int label) {
    if (!(e > s)) return;
    if (!out.segments.empty() && out.segments.back().speaker == traj.speaker_ids[label] &&
        out.segments.back().end >= s) {
      out.segments.back().end = e;
    } else {
      out.segments.push_back({s, e, traj.speaker_ids[label]});
    }
  };

  if (frame_resolution > 0.0) {
    const int n_frames = std::max(1, static_cast<int>(std::ceil((t1 - t0) / frame_resolution - 1e-9)));
    for (int f = 0; f < n_frames; ++f) {
      const double fs = t0 + f * frame_resolution;
      const double fe = std::min(t1, fs + frame_resolution);
      const double fc = 0.5 * (fs + fe);
      const TrajectoryEntry* best = nullptr;
      double best_d = 0.0;
      for (const auto* w : wins) {
        const double d = std::abs(0.5 * (w->start + w->end) - fc);
        if (best == nullptr || d < best_d) { best = w; best_d = d; }
      }
      emit(fs, fe, best->label);
    }
  } else {
    // Exact partition: boundaries at midpoints of consecutive window centers.
    for (std::size_t i = 0; i < wins.size(); ++i) {
      const double c = 0.5 * (wins[i]->start + wins[i]->end);
      const double lo = i == 0 ? t0
                               : 0.5 * (c + 0.5 * (wins[i - 1]->start + wins[i - 1]->end));
      const double hi = i + 1 == wins.size()
                            ? t1
                            : 0.5 * (c + 0.5 * (wins[i + 1]->start + wins[i + 1]->end));
      emit(std::max(lo, t0), std::min(hi, t1), wins[i]->label);
    }
  }
  return out;
}

namespace detail {

struct SerAccumulator {
  double scored = 0.0;
  double error = 0.0;
};

// Piecewise-constant sweep over one meeting. The scored region is reference
// speech minus +-collar neighborhoods of reference boundaries, minus (when
// requested) regions where two or more reference speakers overlap. Scored
// time where the hypothesis names no speaker, or names a speaker outside the
// active reference set, counts as speaker error.
inline SerAccumulator score_one_meeting(const Timeline& reference,
                                        const Timeline& hypothesis, double collar,
                                        bool exclude_overlap) {
  require_sorted(reference, "compute_ser (reference)");
  require_sorted(hypothesis, "compute_ser (hypothesis)");
  std::vector<double> cuts;
  std::vector<double> boundaries;
  for (const auto& s : reference.segments) {
    boundaries.push_back(s.start);
    boundaries.push_back(s.end);
    cuts.push_back(s.start);
    cuts.push_back(s.end);
    if (collar > 0.0) {
      cuts.push_back(s.start - collar);
      cuts.push_back(s.start + collar);
      cuts.push_back(s.end - collar);
      cuts.push_back(s.end + collar);
    }
  }
  for (const auto& s : hypothesis.segments) {
    cuts.push_back(s.start);
    cuts.push_back(s.end);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  SerAccumulator acc;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i], hi = cuts[i + 1];
    const double mid = 0.5 * (lo + hi);
    std::set<std::string> ref_active;
    for (const auto& s : reference.segments) {
      if (s.start <= mid && mid < s.end) ref_active.insert(s.speaker);
    }
    if (ref_active.empty()) continue;
    bool in_collar = false;
    if (collar > 0.0) {
      for (double b : boundaries) {
        if (std::abs(mid - b) < collar) { in_collar = true; break; }
      }
    }
    if (in_collar) continue;
    if (exclude_overlap && ref_active.size() >= 2) continue;

    std::set<std::string> hyp_active;
    for (const auto& s : hypothesis.segments) {
      if (s.start <= mid && mid < s.end) hyp_active.insert(s.speaker);
    }
    bool correct = false;
    for (const auto& spk : hyp_active) {
      if (ref_active.count(spk)) { correct = true; break; }
    }
    acc.scored += hi - lo;
    if (!correct) acc.error += hi - lo;
  }
  return acc;
}

}  // namespace detail

// Speaker Error Rate over matched reference/hypothesis meetings. Speaker
// names are compared directly (enrolled identities; no assignment search).
// Meetings are matched by meeting_id; a reference meeting without a
// hypothesis is scored against an empty hypothesis.
inline ScoreReport compute_ser(std::span<const Timeline> reference,
                               std::span<const Timeline> hypothesis, double collar,
                               bool exclude_overlap) {
  if (collar < 0.0) throw std::invalid_argument("compute_ser: negative collar");
  if (reference.empty()) throw std::invalid_argument("compute_ser: empty reference");
  ScoreReport report;
  for (const auto& ref : reference) {
    const Timeline* hyp = nullptr;
    for (const auto& h : hypothesis) {
      if (h.meeting_id == ref.meeting_id) { hyp = &h; break; }
    }
    const Timeline empty{ref.meeting_id, {}};
    const auto acc =
        detail::score_one_meeting(ref, hyp ? *hyp : empty, collar, exclude_overlap);
    MeetingScore ms;
    ms.meeting_id = ref.meeting_id;
    ms.scored_time = acc.scored;
    ms.speaker_error_time = acc.error;
    ms.ser = acc.scored > 0.0 ? acc.error / acc.scored : 0.0;
    report.meetings.push_back(ms);
    report.scored_time += acc.scored;
    report.speaker_error_time += acc.error;
  }
  if (!(report.scored_time > 0.0)) {
    throw std::runtime_error("compute_ser: empty scored region, SER undefined");
  }
  report.ser = report.speaker_error_time / report.scored_time;
  return report;
}

inline ScoreReport compute_ser(const Timeline& reference, const Timeline& hypothesis,
                               double collar, bool exclude_overlap) {
  return compute_ser(std::span<const Timeline>(&reference, 1),
                     std::span<const Timeline>(&hypothesis, 1), collar, exclude_overlap);
}

// Fraction of windows whose label matches the reference speaker owning the
// window center. Every window center must fall inside exactly one reference
// speaker's speech (the oracle speaker segmentation guarantees this).
inline double window_accuracy(const LabelTrajectory& traj, const Timeline& reference) {
  if (traj.entries.empty()) throw std::invalid_argument("window_accuracy: empty trajectory");
  detail::require_sorted(reference, "window_accuracy");
  std::size_t correct = 0;
  for (const auto& e : traj.entries) {
    const double mid = 0.5 * (e.start + e.end);
    const std::string* owner = nullptr;
    int active = 0;
    for (const auto& s : reference.segments) {
      if (s.start <= mid && mid < s.end) {
        ++active;
        owner = &s.speaker;
      }
    }
    if (active != 1) {
      throw std::invalid_argument(
          "window_accuracy: window center not inside exactly one reference segment");
    }
    if (e.label < 0 || e.label >= static_cast<int>(traj.speaker_ids.size())) {
      throw std::invalid_argument("window_accuracy: label out of range");
    }
    if (traj.speaker_ids[e.label] == *owner) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(traj.entries.size());
}

}  // namespace spkid

#endif  // SPKID_TIMELINE_HPP_
