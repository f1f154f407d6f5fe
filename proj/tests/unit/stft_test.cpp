// tests/unit/stft_test.cpp

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

#include <cmath>
#include <complex>

#include "catch_amalgamated.hpp"
#include "svseval/stft.hpp"
#include "test_util.hpp"

using namespace svseval;
using svseval::testing::Buffer;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("hann window is periodic and unnormalized", "[stft]") {
  const auto w = HannWindow(8);
  CHECK(w[0] == 0.0);
  CHECK_THAT(w[4], WithinAbs(1.0, 1e-15));
  CHECK_THAT(w[2], WithinAbs(0.5, 1e-15));
  CHECK_THAT(w[6], WithinAbs(0.5, 1e-15));
}

TEST_CASE("zero signal gives zero bins", "[stft]") {
  StftConfig c;
  c.fft_size = 256;
  c.hop_size = 64;
  const Spectrogram s = Stft(Buffer(std::vector<double>(2000, 0.0)), c);
  for (const auto &v : s.data()) CHECK(v == std::complex<double>{});
}

TEST_CASE("frame count and geometry", "[stft]") {
  StftConfig c;
  c.fft_size = 256;
  c.hop_size = 64;
  const Spectrogram padded = Stft(Buffer(std::vector<double>(1000, 0.1)), c);
  CHECK(padded.num_bins() == 129);
  CHECK(padded.num_frames() == 1 + 1000 / 64);
  c.center_padding = false;
  const Spectrogram plain = Stft(Buffer(std::vector<double>(1000, 0.1)), c);
  CHECK(plain.num_frames() == 1 + (1000 - 256) / 64);
}

TEST_CASE("impulse at a frame centre has flat magnitude", "[stft]") {
  StftConfig c;
  c.fft_size = 256;
  c.hop_size = 256;
  c.center_padding = false;
  std::vector<double> x(512, 0.0);
  x[128] = 1.0;
  const Spectrogram s = Stft(Buffer(x), c);
  const double centre = HannWindow(256)[128];
  for (std::size_t k = 0; k < s.num_bins(); ++k) CHECK_THAT(std::abs(s.at(0, k)), WithinAbs(centre, 1e-12));
  // Off-centre impulse: |X_k| equals the window value at that position.
  x.assign(512, 0.0);
  x[40] = 1.0;
  const Spectrogram t = Stft(Buffer(x), c);
  for (std::size_t k = 0; k < t.num_bins(); ++k) CHECK_THAT(std::abs(t.at(0, k)), WithinAbs(HannWindow(256)[40], 1e-12));
}

TEST_CASE("energy identity on long noise", "[stft][oracle]") {
  StftConfig c;
  c.fft_size = 512;
  c.hop_size = 128;
  const auto x = svseval::testing::Noise(200000, 21);
  const Spectrogram s = Stft(Buffer(x), c);
  const auto w = HannWindow(c.fft_size);
  double wsq = 0.0;
  for (double v : w) wsq += v * v;
  double spec = 0.0;
  for (std::size_t m = 0; m < s.num_frames(); ++m) {
    for (std::size_t k = 0; k < s.num_bins(); ++k) {
      // One-sided spectrum: interior bins stand for two.
      const double mult = (k == 0 || k == s.num_bins() - 1) ? 1.0 : 2.0;
      spec += mult * std::norm(s.at(m, k));
    }
  }
  double energy = 0.0;
  for (double v : x) energy += v * v;
  const double estimate = spec * static_cast<double>(c.hop_size) / (static_cast<double>(c.fft_size) * wsq);
  CHECK_THAT(estimate, WithinRel(energy, 0.01));
}

TEST_CASE("stft is linear", "[stft][property]") {
  StftConfig c;
  c.fft_size = 1024;
  c.hop_size = 256;
  const auto x = svseval::testing::Noise(8000, 1);
  const auto y = svseval::testing::Noise(8000, 2);
  const double a = 0.7, b = -2.3;
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = a * x[i] + b * y[i];
  const Spectrogram sx = Stft(Buffer(x), c), sy = Stft(Buffer(y), c), sz = Stft(Buffer(z), c);
  double err = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < sz.data().size(); ++i) {
    err += std::norm(sz.data()[i] - (a * sx.data()[i] + b * sy.data()[i]));
    norm += std::norm(sz.data()[i]);
  }
  CHECK(std::sqrt(err / norm) < 1e-9);
}

TEST_CASE("stft rejects short buffers and bad configs", "[stft]") {
  StftConfig c;
  c.fft_size = 256;
  c.hop_size = 64;
  CHECK_THROWS_AS(Stft(Buffer(std::vector<double>(128, 1.0)), c), Error);
  c.center_padding = false;
  CHECK_THROWS_AS(Stft(Buffer(std::vector<double>(255, 1.0)), c), Error);
  c.hop_size = 0;
  CHECK_THROWS_AS(Stft(Buffer(std::vector<double>(1000, 1.0)), c), Error);
}

TEST_CASE("a-weighting against the standard formula", "[stft][oracle]") {
  // tests/oracles/oracles.py, "A-weighting".
  const double norm = AWeightingResponse(1000.0);
  CHECK_THAT(20 * std::log10(AWeightingResponse(100.0) / norm), WithinAbs(-19.142776944083487, 1e-9));
  CHECK_THAT(20 * std::log10(AWeightingResponse(31.5) / norm), WithinAbs(-39.5249943259976, 1e-9));
  CHECK_THAT(20 * std::log10(AWeightingResponse(10000.0) / norm), WithinAbs(-2.4917867314574753, 1e-9));
  CHECK_THAT(20 * std::log10(AWeightingResponse(100.0) / norm), WithinAbs(-19.1, 0.3));

  CHECK(AWeightingResponse(0.0) == 0.0);
  StftConfig k;
  k.fft_size = 441;
  const auto gains = AWeightingGains(k, 44100);  // 100 Hz bins
  CHECK_THAT(gains[10], WithinAbs(1.0, 0.01));
  CHECK_THAT(20 * std::log10(gains[1]), WithinAbs(-19.1, 0.3));
}

TEST_CASE("a-weighting gains are non-negative with a single peak between 1 and 8 kHz", "[stft][property]") {
  StftConfig c;
  c.fft_size = 4096;
  const auto g = AWeightingGains(c, 44100);
  std::size_t peak = 0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    CHECK(g[k] >= 0.0);
    if (g[k] > g[peak]) peak = k;
  }
  const double f_peak = static_cast<double>(peak) * 44100 / 4096;
  CHECK(f_peak >= 1000.0);
  CHECK(f_peak <= 8000.0);
  for (std::size_t k = 1; k <= peak; ++k) CHECK(g[k] >= g[k - 1]);
  for (std::size_t k = peak + 1; k < g.size(); ++k) CHECK(g[k] <= g[k - 1]);
}
