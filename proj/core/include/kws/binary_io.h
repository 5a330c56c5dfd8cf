// Copyright 2026 The kwsxattn Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Little-endian primitives shared by the checkpoint and dataset formats.

#ifndef KWS_BINARY_IO_H_
#define KWS_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kws/errors.h"

namespace kws::io {

template <typename UInt>
void WriteUInt(std::ostream& os, UInt v) {
  char buf[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  os.write(buf, sizeof(UInt));
}

template <typename UInt>
UInt ReadUInt(std::istream& is) {
  unsigned char buf[sizeof(UInt)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(UInt))) {
    throw FormatError("unexpected end of file");
  }
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
  return v;
}

inline void WriteF64(std::ostream& os, double v) {
  WriteUInt<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
}

inline double ReadF64(std::istream& is) {
  return std::bit_cast<double>(ReadUInt<std::uint64_t>(is));
}

inline void WriteF64s(std::ostream& os, std::span<const double> xs) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(xs.data()),
             static_cast<std::streamsize>(xs.size() * sizeof(double)));
  } else {
    for (double x : xs) WriteF64(os, x);
  }
}

inline void ReadF64s(std::istream& is, std::span<double> xs) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char*>(xs.data()),
                 static_cast<std::streamsize>(xs.size() * sizeof(double)))) {
      throw FormatError("unexpected end of file in float payload");
    }
  } else {
    for (double& x : xs) x = ReadF64(is);
  }
}

inline void WriteString(std::ostream& os, std::string_view s) {
  WriteUInt<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string ReadString(std::istream& is, std::size_t max_len = 1 << 16) {
  const auto n = ReadUInt<std::uint32_t>(is);
  if (n > max_len) throw FormatError("string length " + std::to_string(n) + " too large");
  std::string s(n, '\0');
  if (!is.read(s.data(), n)) throw FormatError("unexpected end of file in string");
  return s;
}

inline void ExpectMagic(std::istream& is, std::string_view magic) {
  std::string got(magic.size(), '\0');
  if (!is.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
    throw FormatError("bad magic, expected '" + std::string(magic) + "'");
  }
}

}  // namespace kws::io

#endif  // KWS_BINARY_IO_H_
