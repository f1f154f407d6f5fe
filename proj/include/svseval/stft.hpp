// include/svseval/stft.hpp

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

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "svseval/audio.hpp"
#include "svseval/error.hpp"

namespace svseval {

struct StftConfig {
  std::size_t fft_size = 2048;
  std::size_t hop_size = 512;
  // Reflect-pad fft_size/2 samples on both ends before framing.
  bool center_padding = true;

  std::size_t num_bins() const { return fft_size / 2 + 1; }

  void Validate() const {
    if (fft_size < 2) Fail(ErrorCode::kInvalidConfig, "fft_size must be >= 2");
    if (hop_size == 0 || hop_size > fft_size) Fail(ErrorCode::kInvalidConfig, "hop_size must be in (0, fft_size]");
  }
};

/// One-sided complex STFT, frame-major (M frames x K bins).
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(std::size_t frames, const StftConfig &config, int sample_rate)
      : frames_(frames), config_(config), sample_rate_(sample_rate),
        bins_(frames * config.num_bins()) {}

  std::size_t num_frames() const { return frames_; }
  std::size_t num_bins() const { return config_.num_bins(); }
  const StftConfig &config() const { return config_; }
  int sample_rate() const { return sample_rate_; }

  std::complex<double> &at(std::size_t frame, std::size_t bin) { return bins_[frame * num_bins() + bin]; }
  const std::complex<double> &at(std::size_t frame, std::size_t bin) const {
    return bins_[frame * num_bins() + bin];
  }
  const std::vector<std::complex<double>> &data() const { return bins_; }
  std::vector<std::complex<double>> &data() { return bins_; }

 private:
  std::size_t frames_ = 0;
  StftConfig config_;
  int sample_rate_ = 0;
  std::vector<std::complex<double>> bins_;
};

/// Periodic Hann window, unnormalized (peak 1 at n = size/2).
inline std::vector<double> HannWindow(std::size_t size) {
  std::vector<double> w(size);
  for (std::size_t n = 0; n < size; ++n) {
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(size));
  }
  return w;
}

namespace detail {

// FFTW's planner is not re-entrant; execution of a private plan is.
inline std::mutex &FftwPlannerMutex() {
  static std::mutex mu;
  return mu;
}

struct FftwFree {
  void operator()(void *p) const { fftw_free(p); }
};

class RealFft {
 public:
  explicit RealFft(std::size_t size)
      : size_(size),
        in_(static_cast<double *>(fftw_malloc(sizeof(double) * size))),
        out_(static_cast<fftw_complex *>(fftw_malloc(sizeof(fftw_complex) * (size / 2 + 1)))) {
    std::lock_guard<std::mutex> lock(FftwPlannerMutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(size), in_.get(),
                                 reinterpret_cast<fftw_complex *>(out_.get()), FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard<std::mutex> lock(FftwPlannerMutex());
    fftw_destroy_plan(plan_);
  }
  RealFft(const RealFft &) = delete;
  RealFft &operator=(const RealFft &) = delete;

  double *input() { return in_.get(); }
  std::complex<double> output(std::size_t k) const {
    const auto *c = reinterpret_cast<const fftw_complex *>(out_.get());
    return {c[k][0], c[k][1]};
  }
  void Execute() { fftw_execute(plan_); }

 private:
  std::size_t size_;
  std::unique_ptr<double, FftwFree> in_;
  std::unique_ptr<void, FftwFree> out_;
  fftw_plan plan_;
};

// numpy/torch "reflect" mode: the edge sample is not repeated.
inline std::vector<double> ReflectPad(std::span<const double> x, std::size_t pad) {
  const std::size_t n = x.size();
  std::vector<double> out(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) out[i] = x[pad - i];
  std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t i = 0; i < pad; ++i) out[pad + n + i] = x[n - 2 - i];
  return out;
}

}  // namespace detail

/// Hann-windowed one-sided STFT. Frame m covers samples
/// [m*hop, m*hop + fft_size) of the (optionally padded) signal.
inline Spectrogram Stft(const AudioBuffer &buffer, const StftConfig &config) {
  config.Validate();
  if (buffer.empty()) Fail(ErrorCode::kEmptyBuffer, "stft of empty buffer");
  std::span<const double> signal(buffer.samples);
  std::vector<double> padded;
  if (config.center_padding) {
    const std::size_t pad = config.fft_size / 2;
    if (buffer.size() <= pad) {
      Fail(ErrorCode::kBufferTooShort, "reflect padding needs more than fft_size/2 samples");
    }
    padded = detail::ReflectPad(signal, pad);
    signal = padded;
  } else if (buffer.size() < config.fft_size) {
    Fail(ErrorCode::kBufferTooShort, "buffer shorter than fft_size");
  }

  const std::size_t frames = 1 + (signal.size() - config.fft_size) / config.hop_size;
  const std::size_t bins = config.num_bins();
  const std::vector<double> window = HannWindow(config.fft_size);
  Spectrogram out(frames, config, buffer.sample_rate);
  detail::RealFft fft(config.fft_size);
  for (std::size_t m = 0; m < frames; ++m) {
    const double *frame = signal.data() + m * config.hop_size;
    double *in = fft.input();
    for (std::size_t n = 0; n < config.fft_size; ++n) in[n] = frame[n] * window[n];
    fft.Execute();
    for (std::size_t k = 0; k < bins; ++k) out.at(m, k) = fft.output(k);
  }
  return out;
}

/// Analog A-weighting magnitude response, linear, unnormalized.
inline double AWeightingResponse(double f) {
  const double f2 = f * f;
  const double c1 = 20.598997 * 20.598997;
  const double c2 = 107.65265 * 107.65265;
  const double c3 = 737.86223 * 737.86223;
  const double c4 = 12194.217 * 12194.217;
  return c4 * f2 * f2 / ((f2 + c1) * std::sqrt((f2 + c2) * (f2 + c3)) * (f2 + c4));
}

/// Per-bin linear amplitude gains at f_k = k * sample_rate / fft_size,
/// normalized to unity at 1 kHz.
inline std::vector<double> AWeightingGains(const StftConfig &config, int sample_rate) {
  if (sample_rate <= 0) Fail(ErrorCode::kInvalidConfig, "sample_rate must be positive");
  const double norm = AWeightingResponse(1000.0);
  std::vector<double> gains(config.num_bins());
  for (std::size_t k = 0; k < gains.size(); ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(config.fft_size);
    gains[k] = AWeightingResponse(f) / norm;
  }
  return gains;
}

}  // namespace svseval
