// spkid/rttm.hpp

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

#ifndef SPKID_RTTM_HPP_
#define SPKID_RTTM_HPP_

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spkid/timeline.hpp"

namespace spkid {

// RTTM speaker lines:
//   SPEAKER <meeting> <chan> <start> <dur> <NA> <NA> <speaker> <NA> <NA>
// Times are written with millisecond precision; other line types are
// ignored on read.

inline void write_rttm(std::ostream& os, std::span<const Timeline> timelines) {
  char buf[64];
  for (const auto& t : timelines) {
    for (const auto& s : t.segments) {
      if (t.meeting_id.empty() || s.speaker.empty()) {
        throw std::invalid_argument("write_rttm: empty meeting or speaker id");
      }
      if (t.meeting_id.find_first_of(" \t\n") != std::string::npos ||
          s.speaker.find_first_of(" \t\n") != std::string::npos) {
        throw std::invalid_argument("write_rttm: whitespace in meeting or speaker id");
      }
      std::snprintf(buf, sizeof(buf), "%.3f %.3f", s.start, s.length());
      os << "SPEAKER " << t.meeting_id << " 1 " << buf << " <NA> <NA> "
         << s.speaker << " <NA> <NA>\n";
    }
  }
  if (!os) throw std::runtime_error("write_rttm: stream write failed");
}

inline void write_rttm(std::ostream& os, const Timeline& t) {
  write_rttm(os, std::span<const Timeline>(&t, 1));
}

inline std::vector<Timeline> read_rttm(std::istream& is) {
  std::vector<Timeline> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == ';') continue;
    std::istringstream fields(line);
    std::string type;
    fields >> type;
    if (type != "SPEAKER") continue;
    std::string meeting, chan, na1, na2, speaker;
    double start = 0.0, dur = 0.0;
    fields >> meeting >> chan >> start >> dur >> na1 >> na2 >> speaker;
    if (!fields || meeting.empty() || speaker.empty() || !(dur > 0.0)) {
      throw std::runtime_error("read_rttm: malformed SPEAKER line " +
                               std::to_string(lineno));
    }
    auto it = std::find_if(out.begin(), out.end(), [&meeting](const Timeline& t) {
      return t.meeting_id == meeting;
    });
    if (it == out.end()) {
      out.push_back({meeting, {}});
      it = out.end() - 1;
    }
    it->segments.push_back({start, start + dur, speaker});
  }
  for (auto& t : out) {
    std::stable_sort(t.segments.begin(), t.segments.end(),
                     [](const Segment& a, const Segment& b) { return a.start < b.start; });
  }
  return out;
}

}  // namespace spkid

#endif  // SPKID_RTTM_HPP_
