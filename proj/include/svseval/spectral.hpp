// include/svseval/spectral.hpp

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

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "svseval/audio.hpp"
#include "svseval/error.hpp"
#include "svseval/stft.hpp"

namespace svseval {

enum class LogTermNormalization {
  kPerFrame,    // (1/M) * sum over all M*K entries
  kPerElement,  // (1/(M*K)) * sum
};

struct MrStftConfig {
  std::vector<std::size_t> fft_sizes{256, 512, 1024, 2048, 4096};
  double overlap = 0.75;
  bool a_weighting = true;
  double magnitude_floor = 1e-8;
  bool center_padding = true;
  LogTermNormalization log_normalization = LogTermNormalization::kPerFrame;

  void Validate() const {
    if (fft_sizes.empty()) Fail(ErrorCode::kInvalidConfig, "fft_sizes must not be empty");
    for (auto n : fft_sizes) {
      if (n < 2) Fail(ErrorCode::kInvalidConfig, "fft sizes must be >= 2");
    }
    if (!(overlap >= 0.0 && overlap < 1.0)) Fail(ErrorCode::kInvalidConfig, "overlap must be in [0, 1)");
    if (!(magnitude_floor > 0.0)) Fail(ErrorCode::kInvalidConfig, "magnitude_floor must be > 0");
  }

  StftConfig ResolutionConfig(std::size_t fft_size) const {
    StftConfig c;
    c.fft_size = fft_size;
    const auto hop = static_cast<std::size_t>(std::llround(static_cast<double>(fft_size) * (1.0 - overlap)));
    c.hop_size = std::clamp<std::size_t>(hop, 1, fft_size);
    c.center_padding = center_padding;
    return c;
  }
};

struct ResolutionLoss {
  std::size_t fft_size = 0;
  double sc_term = 0.0;
  double logmag_term = 0.0;
};

struct LossBreakdown {
  std::vector<ResolutionLoss> per_resolution;
  double total = 0.0;
};

struct SingleResolutionTerms {
  double sc_term = 0.0;
  double logmag_term = 0.0;
};

/// Spectral convergence and log-magnitude L1 distance for one resolution.
/// Magnitudes are weighted per bin, then floored. The target sits in the
/// spectral-convergence denominator, so argument order matters.
inline SingleResolutionTerms StftLossSingle(const Spectrogram &estimate, const Spectrogram &target, double floor,
                                            std::span<const double> weights,
                                            LogTermNormalization norm = LogTermNormalization::kPerFrame) {
  const std::size_t frames = target.num_frames();
  const std::size_t bins = target.num_bins();
  if (estimate.num_frames() != frames || estimate.num_bins() != bins) {
    Fail(ErrorCode::kGeometryMismatch, "estimate and target spectrograms differ in shape");
  }
  if (weights.size() != bins) Fail(ErrorCode::kGeometryMismatch, "weight vector does not match bin count");
  if (!(floor > 0.0)) Fail(ErrorCode::kInvalidConfig, "floor must be > 0");

  bool target_nonzero = false;
  for (const auto &c : target.data()) {
    if (c != std::complex<double>{}) {
      target_nonzero = true;
      break;
    }
  }
  if (!target_nonzero) Fail(ErrorCode::kZeroTarget, "target spectrogram is identically zero");

  double diff_sq = 0.0, target_sq = 0.0, log_l1 = 0.0;
  for (std::size_t m = 0; m < frames; ++m) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double t = std::max(std::abs(target.at(m, k)) * weights[k], floor);
      const double e = std::max(std::abs(estimate.at(m, k)) * weights[k], floor);
      diff_sq += (t - e) * (t - e);
      target_sq += t * t;
      log_l1 += std::abs(std::log(t) - std::log(e));
    }
  }
  SingleResolutionTerms out;
  out.sc_term = std::sqrt(diff_sq) / std::sqrt(target_sq);
  const double denom = norm == LogTermNormalization::kPerFrame ? static_cast<double>(frames)
                                                               : static_cast<double>(frames * bins);
  out.logmag_term = log_l1 / denom;
  return out;
}

/// Multi-resolution STFT loss: mean over resolutions of (sc + logmag).
inline LossBreakdown MrStftLoss(const AudioBuffer &estimate, const AudioBuffer &target,
                                const MrStftConfig &config = {}) {
  config.Validate();
  if (estimate.size() != target.size()) Fail(ErrorCode::kLengthMismatch, "estimate and target lengths differ");
  if (estimate.sample_rate != target.sample_rate) Fail(ErrorCode::kRateMismatch, "sample rates differ");
  const std::size_t largest = *std::max_element(config.fft_sizes.begin(), config.fft_sizes.end());
  if (target.size() < largest) Fail(ErrorCode::kBufferTooShort, "signals shorter than the largest fft size");

  LossBreakdown out;
  double sum = 0.0;
  for (std::size_t fft_size : config.fft_sizes) {
    const StftConfig stft_config = config.ResolutionConfig(fft_size);
    const Spectrogram est = Stft(estimate, stft_config);
    const Spectrogram tgt = Stft(target, stft_config);
    const std::vector<double> weights = config.a_weighting ? AWeightingGains(stft_config, target.sample_rate)
                                                           : std::vector<double>(stft_config.num_bins(), 1.0);
    const SingleResolutionTerms terms =
        StftLossSingle(est, tgt, config.magnitude_floor, weights, config.log_normalization);
    out.per_resolution.push_back({fft_size, terms.sc_term, terms.logmag_term});
    sum += terms.sc_term + terms.logmag_term;
  }
  out.total = sum / static_cast<double>(config.fft_sizes.size());
  return out;
}

}  // namespace svseval
