// Copyright (c) 2026 vadstream contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace vad {

/// Channels-height-width extent of an image or feature map.
struct Shape3 {
  int c = 0;
  int h = 0;
  int w = 0;

  long long elems() const { return 1LL * c * h * w; }
  bool operator==(const Shape3& o) const { return c == o.c && h == o.h && w == o.w; }
  bool operator!=(const Shape3& o) const { return !(*this == o); }

  std::string str() const {
    std::ostringstream os;
    os << c << "x" << h << "x" << w;
    return os.str();
  }
};

/// Raised when an input violates an operation's contract.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised on malformed files, missing paths, or undecodable payloads.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a run seed and a role tag.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed + 0x632be59bd9b4e019ULL * (tag + 1));
}

}  // namespace vad
