// tests/unit/loudness_test.cpp

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
#include <numbers>

#include "catch_amalgamated.hpp"
#include "svseval/loudness.hpp"
#include "test_util.hpp"

using namespace svseval;
using svseval::testing::Buffer;
using svseval::testing::Sine;
using Catch::Matchers::WithinAbs;

namespace {

constexpr int kRate = 48000;

std::vector<double> Seconds(double s) { return std::vector<double>(static_cast<std::size_t>(s * kRate), 0.0); }

// Same fixtures as tests/oracles/oracles.py, "pyloudnorm".
std::vector<std::pair<std::string, std::vector<double>>> ReferenceFixtures() {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  out.emplace_back("sine997", Sine(10 * kRate, 997, kRate));
  {
    auto a = Sine(5 * kRate, 220, kRate, 0.3), b = Sine(5 * kRate, 3000, kRate, 0.2);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    out.emplace_back("two_tone", a);
  }
  {
    auto a = Sine(8 * kRate, 1000, kRate, 0.5);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] *= 0.5 + 0.5 * std::sin(2 * std::numbers::pi * 0.5 * static_cast<double>(i) / kRate);
    }
    out.emplace_back("am_tone", a);
  }
  out.emplace_back("low_tone", Sine(4 * kRate, 60, kRate, 0.8));
  {
    auto a = Sine(2 * kRate, 500, kRate, 0.5), b = Sine(2 * kRate, 500, kRate, 0.005);
    for (double v : b) a.push_back(v);
    out.emplace_back("loud_quiet", a);
  }
  return out;
}

}  // namespace

TEST_CASE("997 Hz full-scale sine reads -3.01 LUFS", "[loudness]") {
  const LoudnessResult r = IntegratedLoudness(Buffer(Sine(10 * kRate, 997, kRate), kRate));
  REQUIRE_FALSE(r.below_gate);
  CHECK_THAT(r.integrated_lufs, WithinAbs(-3.01, 0.1));
  CHECK(r.gated_block_count == 97);
}

TEST_CASE("48 kHz coefficients match the tabulated filter", "[loudness]") {
  const auto f = loudness::KWeightingFilters(48000);
  CHECK_THAT(f[0].b[0], WithinAbs(1.53512485958697, 1e-9));
  CHECK_THAT(f[0].b[1], WithinAbs(-2.69169618940638, 1e-9));
  CHECK_THAT(f[0].b[2], WithinAbs(1.19839281085285, 1e-9));
  CHECK_THAT(f[0].a[1], WithinAbs(-1.69065929318241, 1e-9));
  CHECK_THAT(f[0].a[2], WithinAbs(0.73248077421585, 1e-9));
  CHECK_THAT(f[1].a[1], WithinAbs(-1.99004745483398, 1e-9));
  CHECK_THAT(f[1].a[2], WithinAbs(0.99007225036621, 1e-9));
}

TEST_CASE("meter agrees with an independent reference meter", "[loudness][oracle]") {
  // pyloudnorm values from tests/oracles/oracles.py.
  const std::map<std::string, double> expected{{"sine997", -3.0516960927262997},
                                                {"two_tone", -11.146636343861603},
                                                {"am_tone", -12.022098738651671},
                                                {"low_tone", -8.570376156905903},
                                                {"loud_quiet", -10.060509348633467}};
  for (const auto &[name, x] : ReferenceFixtures()) {
    INFO(name);
    const LoudnessResult r = IntegratedLoudness(Buffer(x, kRate));
    CHECK_THAT(r.integrated_lufs, WithinAbs(expected.at(name), 0.05));
  }
}

TEST_CASE("silence is below the gate", "[loudness]") {
  const LoudnessResult r = IntegratedLoudness(Buffer(Seconds(2), kRate));
  CHECK(r.below_gate);
  CHECK(r.gated_block_count == 0);
  CHECK_THROWS_AS(NormalizeLoudness(Buffer(Seconds(2), kRate), -18.0), Error);
  try {
    NormalizeLoudness(Buffer(Seconds(2), kRate), -18.0);
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kAllBlocksGated);
  }
}

TEST_CASE("too short input", "[loudness]") {
  try {
    IntegratedLoudness(Buffer(Seconds(0.39), kRate));
    FAIL("expected TooShort");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kTooShort);
  }
}

TEST_CASE("gain moves loudness by 20 log10 g", "[loudness][property]") {
  const auto x = svseval::testing::Noise(3 * kRate, 8, 0.1);
  const double base = IntegratedLoudness(Buffer(x, kRate)).integrated_lufs;
  for (double g : {0.1, 0.5, 2.0, 3.7}) {
    const double l = IntegratedLoudness(Buffer(svseval::testing::Scaled(x, g), kRate)).integrated_lufs;
    CHECK_THAT(l - base, WithinAbs(20 * std::log10(g), 0.05));
  }
}

TEST_CASE("polarity does not change loudness", "[loudness][property]") {
  const auto x = svseval::testing::Noise(2 * kRate, 9, 0.2);
  CHECK(IntegratedLoudness(Buffer(x, kRate)).integrated_lufs ==
        IntegratedLoudness(Buffer(svseval::testing::Scaled(x, -1.0), kRate)).integrated_lufs);
}

TEST_CASE("works at 44.1 kHz", "[loudness]") {
  const LoudnessResult r = IntegratedLoudness(Buffer(Sine(10 * 44100, 997, 44100), 44100));
  CHECK_THAT(r.integrated_lufs, WithinAbs(-3.01, 0.1));
}

TEST_CASE("normalization", "[loudness]") {
  const auto x = svseval::testing::Noise(5 * kRate, 10, 0.05);
  const AudioBuffer in = Buffer(x, kRate);

  SECTION("to -23 then to -18 is about +5 dB") {
    const NormalizedAudio at23 = NormalizeLoudness(in, -23.0);
    CHECK_THAT(at23.loudness.integrated_lufs, WithinAbs(-23.0, 0.2));
    const NormalizedAudio at18 = NormalizeLoudness(at23.audio, -18.0);
    CHECK_THAT(at18.loudness.applied_gain_db, WithinAbs(5.0, 0.2));
    CHECK_THAT(IntegratedLoudness(at18.audio).integrated_lufs, WithinAbs(-18.0, 0.2));
  }
  SECTION("fixed point") {
    const NormalizedAudio once = NormalizeLoudness(in, -18.0);
    const NormalizedAudio twice = NormalizeLoudness(once.audio, -18.0);
    CHECK(std::abs(twice.loudness.applied_gain_db) < 0.05);
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      diff += std::pow(twice.audio.samples[i] - once.audio.samples[i], 2);
      ref += std::pow(once.audio.samples[i], 2);
    }
    CHECK(std::sqrt(diff / ref) < 0.006);
  }
}
