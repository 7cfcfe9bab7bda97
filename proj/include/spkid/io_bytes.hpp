// spkid/io_bytes.hpp

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

// Little-endian scalar I/O for the binary file formats. Encoding is done
// with explicit shifts so the written bytes do not depend on host order.

#ifndef SPKID_IO_BYTES_HPP_
#define SPKID_IO_BYTES_HPP_

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace spkid {
namespace io {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_uint(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  }
  write_bytes(os, buf, sizeof(T));
}

inline void write_u16(std::ostream& os, std::uint16_t v) { write_uint(os, v); }
inline void write_u32(std::ostream& os, std::uint32_t v) { write_uint(os, v); }
inline void write_u64(std::ostream& os, std::uint64_t v) { write_uint(os, v); }

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  write_u32(os, bits);
}

inline void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  write_u64(os, bits);
}

inline void read_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw std::runtime_error(std::string("truncated input while reading ") + what);
  }
}

template <typename T>
T read_uint(std::istream& is, const char* what) {
  unsigned char buf[sizeof(T)];
  read_bytes(is, buf, sizeof(T), what);
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(buf[i]) << (8 * i);
  }
  return v;
}

inline std::uint16_t read_u16(std::istream& is, const char* what) {
  return read_uint<std::uint16_t>(is, what);
}
inline std::uint32_t read_u32(std::istream& is, const char* what) {
  return read_uint<std::uint32_t>(is, what);
}
inline std::uint64_t read_u64(std::istream& is, const char* what) {
  return read_uint<std::uint64_t>(is, what);
}

inline float read_f32(std::istream& is, const char* what) {
  const std::uint32_t bits = read_u32(is, what);
  float v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

inline double read_f64(std::istream& is, const char* what) {
  const std::uint64_t bits = read_u64(is, what);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  if (s.size() > 0xffff) throw std::invalid_argument("string too long for u16 length prefix");
  write_u16(os, static_cast<std::uint16_t>(s.size()));
  write_bytes(os, s.data(), s.size());
}

inline std::string read_string(std::istream& is, const char* what) {
  const std::uint16_t n = read_u16(is, what);
  std::string s(n, '\0');
  if (n > 0) read_bytes(is, s.data(), n, what);
  return s;
}

}  // namespace io
}  // namespace spkid

#endif  // SPKID_IO_BYTES_HPP_
