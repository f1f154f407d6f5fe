// include/svseval/loudness.hpp

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

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "svseval/audio.hpp"
#include "svseval/error.hpp"

namespace svseval {

struct LoudnessResult {
  // Meaningful only when below_gate is false.
  double integrated_lufs = -std::numeric_limits<double>::infinity();
  bool below_gate = false;
  std::size_t gated_block_count = 0;
  double applied_gain_db = 0.0;
};

namespace loudness {

inline constexpr double kBlockSeconds = 0.4;
inline constexpr double kStepSeconds = 0.1;
inline constexpr double kAbsoluteGateLufs = -70.0;
inline constexpr double kRelativeGateLu = -10.0;
inline constexpr double kOffset = -0.691;

struct Biquad {
  std::array<double, 3> b{};
  std::array<double, 3> a{1.0, 0.0, 0.0};
};

// Pre-filter high shelf and RLB high-pass, re-derived for any rate from the
// analog prototypes that reproduce the tabulated 48 kHz coefficients.
inline std::array<Biquad, 2> KWeightingFilters(int sample_rate) {
  const double fs = sample_rate;
  std::array<Biquad, 2> stages;
  {
    const double f0 = 1681.974450955533;
    const double gain_db = 3.999843853973347;
    const double q = 0.7071752369554196;
    const double k = std::tan(std::numbers::pi * f0 / fs);
    const double vh = std::pow(10.0, gain_db / 20.0);
    const double vb = std::pow(vh, 0.4996667741545416);
    const double a0 = 1.0 + k / q + k * k;
    stages[0].b = {(vh + vb * k / q + k * k) / a0, 2.0 * (k * k - vh) / a0, (vh - vb * k / q + k * k) / a0};
    stages[0].a = {1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0};
  }
  {
    const double f0 = 38.13547087602444;
    const double q = 0.5003270373238773;
    const double k = std::tan(std::numbers::pi * f0 / fs);
    const double a0 = 1.0 + k / q + k * k;
    stages[1].b = {1.0, -2.0, 1.0};
    stages[1].a = {1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0};
  }
  return stages;
}

inline std::vector<double> KWeight(std::span<const double> x, int sample_rate) {
  std::vector<double> y(x.begin(), x.end());
  for (const Biquad &s : KWeightingFilters(sample_rate)) {
    // Direct form I.
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (double &v : y) {
      const double in = v;
      const double out = s.b[0] * in + s.b[1] * x1 + s.b[2] * x2 - s.a[1] * y1 - s.a[2] * y2;
      x2 = x1;
      x1 = in;
      y2 = y1;
      y1 = out;
      v = out;
    }
  }
  return y;
}

}  // namespace loudness

/// Gated integrated loudness of a mono buffer (BS.1770-4 / EBU R128).
inline LoudnessResult IntegratedLoudness(const AudioBuffer &buffer) {
  if (buffer.sample_rate <= 0) Fail(ErrorCode::kInvalidConfig, "sample_rate must be positive");
  const auto block = static_cast<std::size_t>(std::llround(loudness::kBlockSeconds * buffer.sample_rate));
  const auto step = static_cast<std::size_t>(std::llround(loudness::kStepSeconds * buffer.sample_rate));
  if (buffer.size() < block) Fail(ErrorCode::kTooShort, "loudness needs at least 400 ms of audio");
  detail::CheckFinite(buffer, "loudness input");

  const std::vector<double> y = loudness::KWeight(buffer.samples, buffer.sample_rate);
  const std::size_t count = 1 + (y.size() - block) / step;
  std::vector<double> mean_square(count);
  for (std::size_t j = 0; j < count; ++j) {
    double acc = 0.0;
    for (std::size_t i = j * step; i < j * step + block; ++i) acc += y[i] * y[i];
    mean_square[j] = acc / static_cast<double>(block);
  }
  auto to_lufs = [](double z) { return loudness::kOffset + 10.0 * std::log10(z); };

  double sum = 0.0;
  std::size_t kept = 0;
  for (double z : mean_square) {
    if (z > 0.0 && to_lufs(z) > loudness::kAbsoluteGateLufs) {
      sum += z;
      ++kept;
    }
  }
  LoudnessResult result;
  if (kept == 0) {
    result.below_gate = true;
    return result;
  }
  const double relative_gate = to_lufs(sum / static_cast<double>(kept)) + loudness::kRelativeGateLu;

  sum = 0.0;
  kept = 0;
  for (double z : mean_square) {
    if (z > 0.0) {
      const double l = to_lufs(z);
      if (l > loudness::kAbsoluteGateLufs && l > relative_gate) {
        sum += z;
        ++kept;
      }
    }
  }
  if (kept == 0) {
    result.below_gate = true;
    return result;
  }
  result.integrated_lufs = to_lufs(sum / static_cast<double>(kept));
  result.gated_block_count = kept;
  return result;
}

struct NormalizeOptions {
  double tolerance_lu = 0.2;
  int max_iterations = 3;
};

struct NormalizedAudio {
  AudioBuffer audio;
  LoudnessResult loudness;
};

/// Applies one scalar gain so that the re-measured loudness lands within
/// tolerance of the target. Gating can move after a gain change, so the gain
/// is refined up to max_iterations times. No limiting is applied.
inline NormalizedAudio NormalizeLoudness(const AudioBuffer &buffer, double target_lufs,
                                         const NormalizeOptions &options = {}) {
  LoudnessResult measured = IntegratedLoudness(buffer);
  if (measured.below_gate) Fail(ErrorCode::kAllBlocksGated, "signal is below the absolute gate");

  auto apply = [&buffer](double gain_db) {
    AudioBuffer out = buffer;
    const double g = std::pow(10.0, gain_db / 20.0);
    for (double &v : out.samples) v *= g;
    return out;
  };

  double gain_db = 0.0;
  AudioBuffer out = buffer;
  for (int it = 0; it < options.max_iterations; ++it) {
    const double error = target_lufs - measured.integrated_lufs;
    if (it > 0 && std::abs(error) <= options.tolerance_lu) break;
    gain_db += error;
    out = apply(gain_db);
    measured = IntegratedLoudness(out);
    if (measured.below_gate) Fail(ErrorCode::kAllBlocksGated, "signal fell below the gate after gain");
    if (std::abs(target_lufs - measured.integrated_lufs) <= options.tolerance_lu) break;
  }
  if (std::abs(target_lufs - measured.integrated_lufs) > options.tolerance_lu) {
    Warn("loudness normalization missed target by " +
         std::to_string(measured.integrated_lufs - target_lufs) + " LU");
  }
  std::size_t clipped = 0;
  for (double v : out.samples) clipped += std::abs(v) > 1.0;
  if (clipped > 0) Warn(std::to_string(clipped) + " samples exceed full scale after normalization");
  measured.applied_gain_db = gain_db;
  return {std::move(out), measured};
}

}  // namespace svseval
