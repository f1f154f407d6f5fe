// include/svseval/random.hpp

// Copyright 2026 The svseval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace svseval {

/// Seeded index generator shared by every randomized procedure in the
/// library (excerpt draws, bootstrap resampling, group shuffles).
///
/// The standard distributions are implementation-defined, so indices are
/// produced by the multiply-shift map floor(u32 * n / 2^32) over raw
/// std::mt19937 output. Any MT19937 seeded with init_genrand(seed) replays
/// the exact same sequence.
class IndexDraw {
 public:
  explicit IndexDraw(std::uint32_t seed) : engine_(seed) {}

  // Uniform in [0, n). n must be in [1, 2^32].
  std::uint64_t operator()(std::uint64_t n) {
    const std::uint64_t raw = engine_();
    return (raw * n) >> 32;
  }

  std::uint32_t Raw() { return static_cast<std::uint32_t>(engine_()); }

  /// Fisher-Yates, walking from the back.
  template <typename T>
  void Shuffle(std::vector<T> &items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>((*this)(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937 engine_;
};

// Derives an independent stream seed from a base seed and a stream index.
inline std::uint32_t DeriveSeed(std::uint32_t base, std::uint64_t stream) {
  std::uint64_t z = (static_cast<std::uint64_t>(base) << 32) ^ stream;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<std::uint32_t>(z);
}

}  // namespace svseval
