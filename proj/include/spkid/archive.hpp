// spkid/archive.hpp

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

// Embedding archives. Binary layout (all little-endian):
//   magic "XVEC" | version u16 | dim u32 | count u64
//   per record: id (u16 length + utf-8 bytes) | start f64 | end f64 | dim x f32
// Values are stored in 32-bit floats (extractor precision); computation
// upstream and downstream is in doubles. A line-oriented text twin exists
// for debugging and tests.

#ifndef SPKID_ARCHIVE_HPP_
#define SPKID_ARCHIVE_HPP_

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spkid/embedding.hpp"
#include "spkid/io_bytes.hpp"

namespace spkid {

struct ArchiveRecord {
  std::string id;  // "<speaker>/<utterance>" for labeled data, "<meeting>" for meetings
  double start = 0.0;
  double end = 0.0;
  Embedding vector;
};

struct EmbeddingArchive {
  std::uint32_t dim = 0;
  std::vector<ArchiveRecord> records;
};

inline constexpr char kArchiveMagic[4] = {'X', 'V', 'E', 'C'};
inline constexpr std::uint16_t kArchiveVersion = 1;

inline void write_archive(std::ostream& os, const EmbeddingArchive& a) {
  io::write_bytes(os, kArchiveMagic, 4);
  io::write_u16(os, kArchiveVersion);
  io::write_u32(os, a.dim);
  io::write_u64(os, static_cast<std::uint64_t>(a.records.size()));
  for (const auto& r : a.records) {
    if (r.vector.size() != static_cast<Eigen::Index>(a.dim)) {
      throw std::invalid_argument("write_archive: record '" + r.id + "' has wrong dim");
    }
    io::write_string(os, r.id);
    io::write_f64(os, r.start);
    io::write_f64(os, r.end);
    for (Eigen::Index i = 0; i < r.vector.size(); ++i) {
      io::write_f32(os, static_cast<float>(r.vector(i)));
    }
  }
  if (!os) throw std::runtime_error("write_archive: stream write failed");
}

inline EmbeddingArchive read_archive(std::istream& is) {
  char magic[4];
  io::read_bytes(is, magic, 4, "archive magic");
  if (std::memcmp(magic, kArchiveMagic, 4) != 0) {
    throw std::runtime_error("read_archive: bad magic, not an embedding archive");
  }
  const std::uint16_t version = io::read_u16(is, "archive version");
  if (version != kArchiveVersion) {
    throw std::runtime_error("read_archive: unsupported version " + std::to_string(version));
  }
  EmbeddingArchive a;
  a.dim = io::read_u32(is, "archive dim");
  const std::uint64_t count = io::read_u64(is, "archive count");
  a.records.reserve(count);
  for (std::uint64_t n = 0; n < count; ++n) {
    ArchiveRecord r;
    r.id = io::read_string(is, "record id");
    r.start = io::read_f64(is, "record start");
    r.end = io::read_f64(is, "record end");
    r.vector.resize(a.dim);
    for (std::uint32_t i = 0; i < a.dim; ++i) {
      r.vector(i) = static_cast<double>(io::read_f32(is, "record values"));
    }
    a.records.push_back(std::move(r));
  }
  return a;
}

// Text twin: header "XVECTEXT <version> <dim> <count>", then one record per
// line: id start end v0 v1 ... (floats with enough digits to round-trip the
// f32 storage precision).
inline void write_archive_text(std::ostream& os, const EmbeddingArchive& a) {
  os << "XVECTEXT " << kArchiveVersion << ' ' << a.dim << ' ' << a.records.size() << '\n';
  char buf[64];
  for (const auto& r : a.records) {
    if (r.id.find_first_of(" \t\n") != std::string::npos || r.id.empty()) {
      throw std::invalid_argument("write_archive_text: id empty or contains whitespace");
    }
    if (r.vector.size() != static_cast<Eigen::Index>(a.dim)) {
      throw std::invalid_argument("write_archive_text: record '" + r.id + "' has wrong dim");
    }
    os << r.id;
    std::snprintf(buf, sizeof(buf), " %.17g %.17g", r.start, r.end);
    os << buf;
    for (Eigen::Index i = 0; i < r.vector.size(); ++i) {
      std::snprintf(buf, sizeof(buf), " %.9g", static_cast<double>(static_cast<float>(r.vector(i))));
      os << buf;
    }
    os << '\n';
  }
  if (!os) throw std::runtime_error("write_archive_text: stream write failed");
}

inline EmbeddingArchive read_archive_text(std::istream& is) {
  std::string tag;
  std::uint32_t version = 0;
  std::uint64_t count = 0;
  EmbeddingArchive a;
  is >> tag >> version >> a.dim >> count;
  if (!is || tag != "XVECTEXT") throw std::runtime_error("read_archive_text: bad header");
  if (version != kArchiveVersion) {
    throw std::runtime_error("read_archive_text: unsupported version " + std::to_string(version));
  }
  for (std::uint64_t n = 0; n < count; ++n) {
    ArchiveRecord r;
    is >> r.id >> r.start >> r.end;
    r.vector.resize(a.dim);
    for (std::uint32_t i = 0; i < a.dim; ++i) {
      // Values are stored at binary-format precision; quantize through
      // float so both formats load identical embeddings.
      double v = 0.0;
      is >> v;
      r.vector(i) = static_cast<double>(static_cast<float>(v));
    }
    if (!is) {
      throw std::runtime_error("read_archive_text: truncated at record " + std::to_string(n));
    }
    a.records.push_back(std::move(r));
  }
  return a;
}

// Path helpers used by the tools; ".txt"-suffixed paths get the text twin.
inline bool archive_path_is_text(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".txt") == 0;
}

inline void save_archive(const std::string& path, const EmbeddingArchive& a) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_archive: cannot open " + path);
  if (archive_path_is_text(path)) {
    write_archive_text(os, a);
  } else {
    write_archive(os, a);
  }
}

inline EmbeddingArchive load_archive(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_archive: cannot open " + path);
  return archive_path_is_text(path) ? read_archive_text(is) : read_archive(is);
}

}  // namespace spkid

#endif  // SPKID_ARCHIVE_HPP_
