// tests/unit/study_test.cpp

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

#include <algorithm>
#include <map>
#include <set>

#include "catch_amalgamated.hpp"
#include "svseval/study.hpp"

using namespace svseval;
using Catch::Matchers::WithinAbs;

namespace {

const std::array<std::string, 5> kModels{"HTDemucs", "MelRoFo(L)", "MelRoFo(S)", "MelRoFo(S)+BigVGAN", "SGMSVS"};

StudyConfig Config(int references, std::uint32_t seed = 42) {
  StudyConfig c;
  c.rng_seed = seed;
  for (int r = 0; r < references; ++r) {
    for (const auto &m : kModels) {
      StimulusPair s;
      s.id = "song" + std::to_string(r) + "_" + m;
      s.reference_path = "refs/song" + std::to_string(r) + ".wav";
      s.test_path = "est/" + m + "/song" + std::to_string(r) + ".wav";
      s.model_label = m;
      s.model_type = ModelTypeForLabel(m);
      c.stimuli.push_back(std::move(s));
    }
  }
  return c;
}

RatingRecord Rec(std::string pid, std::string sid, int rating) {
  RatingRecord r;
  r.participant_id = std::move(pid);
  r.stimulus_id = std::move(sid);
  r.rating = rating;
  return r;
}

ErrorCode CodeOf(auto &&fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIoError;
}

}  // namespace

TEST_CASE("250 stimuli split 83/83/84 with five gold each", "[study]") {
  const StudyConfig config = Config(50);
  REQUIRE(config.stimuli.size() == 250);
  const StudyDesign d = BuildGroups(config);
  REQUIRE(d.groups.size() == 3);
  CHECK(d.groups[0].stimulus_ids.size() == 83);
  CHECK(d.groups[1].stimulus_ids.size() == 83);
  CHECK(d.groups[2].stimulus_ids.size() == 84);
  CHECK(d.session_length(0) == 88);
  CHECK(d.session_length(1) == 88);
  CHECK(d.session_length(2) == 89);

  std::multiset<std::string> all;
  std::set<std::string> gold_refs;
  for (const auto &g : d.groups) {
    all.insert(g.stimulus_ids.begin(), g.stimulus_ids.end());
    REQUIRE(g.gold.size() == 5);
    for (const auto &gold : g.gold) {
      CHECK(gold.reference_path == gold.test_path);
      CHECK(gold.model_type == ModelType::kGold);
      gold_refs.insert(gold.reference_path);
    }
  }
  std::multiset<std::string> expected;
  for (const auto &s : config.stimuli) expected.insert(s.id);
  CHECK(all == expected);
  CHECK(gold_refs.size() == 15);
}

TEST_CASE("single group holds everything", "[study]") {
  StudyConfig config = Config(10);
  config.group_count = 1;
  const StudyDesign d = BuildGroups(config);
  REQUIRE(d.groups.size() == 1);
  CHECK(d.groups[0].stimulus_ids.size() == 50);
  CHECK(d.session_length(0) == 55);
}

TEST_CASE("grouping is a partition for many sizes and seeds", "[study][property]") {
  for (int refs = 3; refs <= 40; refs += 7) {
    for (std::uint32_t seed = 0; seed < 5; ++seed) {
      for (int groups = 1; groups <= 4; ++groups) {
        StudyConfig config = Config(refs, seed);
        config.group_count = groups;
        config.gold_per_group = std::min(5, refs / groups);
        const StudyDesign d = BuildGroups(config);
        std::set<std::string> seen;
        std::size_t lo = SIZE_MAX, hi = 0;
        for (const auto &g : d.groups) {
          lo = std::min(lo, g.stimulus_ids.size());
          hi = std::max(hi, g.stimulus_ids.size());
          for (const auto &id : g.stimulus_ids) CHECK(seen.insert(id).second);
        }
        CHECK(seen.size() == config.stimuli.size());
        CHECK(hi - lo <= 1);
      }
    }
  }
}

TEST_CASE("grouping is deterministic in the seed", "[study]") {
  const StudyDesign a = BuildGroups(Config(50, 7)), b = BuildGroups(Config(50, 7)), c = BuildGroups(Config(50, 8));
  for (std::size_t g = 0; g < 3; ++g) {
    CHECK(a.groups[g].stimulus_ids == b.groups[g].stimulus_ids);
    CHECK(a.groups[g].gold[0].reference_path == b.groups[g].gold[0].reference_path);
  }
  CHECK(a.groups[0].stimulus_ids != c.groups[0].stimulus_ids);
}

TEST_CASE("session orders are permutations and vary by session", "[study]") {
  const StudyDesign d = BuildGroups(Config(50));
  const auto o1 = SessionTrialOrder(d.groups[0], 42, 0);
  const auto o2 = SessionTrialOrder(d.groups[0], 42, 1);
  CHECK(o1.size() == 88);
  CHECK(o1 != o2);
  CHECK(o1 == SessionTrialOrder(d.groups[0], 42, 0));
  auto s1 = o1, s2 = o2;
  std::sort(s1.begin(), s1.end());
  std::sort(s2.begin(), s2.end());
  CHECK(s1 == s2);
}

TEST_CASE("study configuration errors", "[study]") {
  CHECK(CodeOf([] { BuildGroups(Config(2)); }) == ErrorCode::kNotEnoughGoldCandidates);
  StudyConfig mismatch = Config(5);
  mismatch.stimuli[0].model_type = ModelType::kGenerative;
  CHECK(CodeOf([&] { BuildGroups(mismatch); }) == ErrorCode::kInvalidConfig);
  StudyConfig dup = Config(5);
  dup.stimuli[1].id = dup.stimuli[0].id;
  CHECK(CodeOf([&] { BuildGroups(dup); }) == ErrorCode::kInvalidConfig);
  CHECK(CodeOf([] { BuildGroups(StudyConfig{}); }) == ErrorCode::kInvalidConfig);
  CHECK(CodeOf([] { ModelTypeForLabel("Spleeter"); }) == ErrorCode::kInvalidConfig);
  CHECK(ModelTypeForLabel("SGMSVS") == ModelType::kGenerative);
  CHECK(ModelTypeForLabel("MelRoFo(L)") == ModelType::kDiscriminative);
}

TEST_CASE("dcr labels", "[study]") {
  CHECK(DcrLabel(5) == "Degradation is inaudible");
  CHECK(DcrLabel(1) == "Degradation is very annoying");
  CHECK(CodeOf([] { DcrLabel(0); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("screening boundary", "[study]") {
  CHECK(ScreenParticipant({3, 3, 3, 5, 5}) == ScreeningDecision::kRetained);
  CHECK(ScreenParticipant({3, 3, 3, 3, 5}) == ScreeningDecision::kExcluded);
  CHECK(ScreenParticipant({4, 4, 4, 4, 4}) == ScreeningDecision::kRetained);
  CHECK(ScreenParticipant({1, 1, 1, 1, 1}) == ScreeningDecision::kExcluded);
  CHECK(ScreenParticipant({}) == ScreeningDecision::kRetained);

  const std::set<std::string> gold{"g0", "g1", "g2", "g3", "g4"};
  std::vector<RatingRecord> records;
  const std::vector<int> p1{3, 3, 3, 5, 5}, p2{3, 3, 3, 3, 5};
  for (int k = 0; k < 5; ++k) {
    records.push_back(Rec("p1", "g" + std::to_string(k), p1[static_cast<std::size_t>(k)]));
    records.push_back(Rec("p2", "g" + std::to_string(k), p2[static_cast<std::size_t>(k)]));
  }
  records.push_back(Rec("p1", "a", 2));
  records.push_back(Rec("p1", "b", 4));
  const auto screening = ScreenParticipants(records, gold);
  REQUIRE(screening.size() == 2);
  CHECK(screening[0].participant_id == "p1");
  CHECK(screening[0].gold_below_threshold == 3);
  CHECK(screening[0].test_ratings == 2);
  CHECK(screening[0].rating_variance == 2.0);
  CHECK(screening[1].decision == ScreeningDecision::kExcluded);
  CHECK(RetainedParticipants(screening) == std::set<std::string>{"p1"});
}

TEST_CASE("dmos is the mean of retained ratings", "[study]") {
  const std::set<std::string> gold{"g"};
  const std::vector<RatingRecord> records{Rec("p1", "a", 5), Rec("p2", "a", 4), Rec("p3", "a", 1),
                                          Rec("p1", "b", 2), Rec("p2", "g", 5), Rec("p3", "b", 5)};
  const auto out = ComputeDmos(records, {"p1", "p2"}, gold);
  REQUIRE(out.size() == 2);
  CHECK(out[0].stimulus_id == "a");
  CHECK(out[0].dmos == 4.5);
  CHECK(out[0].n == 2);
  CHECK(out[1].stimulus_id == "b");
  CHECK(out[1].dmos == 2.0);
}

TEST_CASE("twelve ratings", "[study]") {
  const std::vector<int> ratings{1, 2, 2, 3, 4, 5, 5, 5, 3, 4, 1, 2};
  std::vector<RatingRecord> records;
  std::set<std::string> retained;
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    records.push_back(Rec("p" + std::to_string(i), "s1", ratings[i]));
    retained.insert("p" + std::to_string(i));
  }
  BootstrapOptions opts;
  opts.rng_seed = 3;
  const auto out = ComputeDmos(records, retained, {}, {}, opts);
  REQUIRE(out.size() == 1);
  CHECK(out[0].dmos == 37.0 / 12.0);
  CHECK(out[0].median == 3.0);
  // tests/oracles/oracles.py, "DMOS entry".
  CHECK(DeriveSeed(3, StableHash("s1")) == 1353831419u);
  CHECK(out[0].ci_low == 2.0);
  CHECK(out[0].ci_high == 4.5);

  SECTION("record order does not matter") {
    for (std::uint32_t seed = 0; seed < 5; ++seed) {
      auto shuffled = records;
      IndexDraw(seed).Shuffle(shuffled);
      const auto again = ComputeDmos(shuffled, retained, {}, {}, opts);
      CHECK(again[0].dmos == out[0].dmos);
      CHECK(again[0].ci_low == out[0].ci_low);
      CHECK(again[0].ci_high == out[0].ci_high);
    }
  }
}

TEST_CASE("dmos stays in 1..5", "[study][property]") {
  IndexDraw draw(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RatingRecord> records;
    const auto n = 1 + draw(30);
    for (std::uint64_t i = 0; i < n; ++i) records.push_back(Rec("p", "x", 1 + static_cast<int>(draw(5))));
    BootstrapOptions opts;
    opts.resamples = 200;
    const auto out = ComputeDmos(records, {"p"}, {}, {}, opts);
    CHECK(out[0].dmos >= 1.0);
    CHECK(out[0].dmos <= 5.0);
    CHECK(out[0].ci_low <= out[0].median);
    CHECK(out[0].median <= out[0].ci_high);
  }
}

TEST_CASE("dmos failures", "[study]") {
  CHECK(CodeOf([] { ComputeDmos({Rec("p", "a", 3)}, {}, {}); }) == ErrorCode::kUnratedStimulus);
  CHECK(CodeOf([] { ComputeDmos({}, {"p"}, {}, {"a"}); }) == ErrorCode::kUnratedStimulus);
  CHECK(CodeOf([] { ComputeDmos({Rec("p", "a", 6)}, {"p"}, {}); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("bootstrap replay", "[study][oracle]") {
  // tests/oracles/oracles.py, "Bootstrap".
  const std::vector<double> five{1, 2, 3, 4, 5};
  auto ci = [](const std::vector<double> &v, std::uint32_t seed, int resamples, double conf) {
    BootstrapOptions o;
    o.rng_seed = seed;
    o.resamples = resamples;
    o.confidence = conf;
    return BootstrapMedianCi(v, o);
  };
  auto i = ci(five, 7, 10000, 0.95);
  CHECK(i.low == 1.0);
  CHECK(i.high == 5.0);
  i = ci(five, 12345, 10000, 0.95);
  CHECK(i.low == 1.0);
  CHECK(i.high == 5.0);
  i = ci(five, 99, 2000, 0.8);
  CHECK(i.low == 2.0);
  CHECK(i.high == 4.0);
  i = ci({0.31, 1.7, 2.25, 2.9, 3.15, 4.8, 5.5, 6.05}, 11, 999, 0.9);
  CHECK_THAT(i.low, WithinAbs(1.975, 1e-12));
  CHECK_THAT(i.high, WithinAbs(5.15, 1e-12));
  i = ci({1, 2, 2, 3, 4, 5, 5, 5, 3, 4, 1, 2}, 5, 10000, 0.9);
  CHECK(i.low == 2.0);
  CHECK(i.high == 4.0);
}

TEST_CASE("bootstrap edge cases", "[study]") {
  BootstrapOptions o;
  const Interval point = BootstrapMedianCi({3, 3, 3, 3}, o);
  CHECK(point.low == 3.0);
  CHECK(point.high == 3.0);
  o.confidence = 0.0;
  const Interval zero = BootstrapMedianCi({1, 2, 4, 5}, o);
  CHECK(zero.low == 3.0);
  CHECK(zero.high == 3.0);
  o.confidence = 1.0;
  CHECK(CodeOf([&] { BootstrapMedianCi({1, 2}, o); }) == ErrorCode::kInvalidConfig);
  CHECK(CodeOf([] { BootstrapMedianCi({}); }) == ErrorCode::kEmptyInput);
  CHECK(Median({4, 1, 3, 2}) == 2.5);
  CHECK(Median({5, 1, 3}) == 3.0);
}

TEST_CASE("ratings csv", "[study]") {
  std::string text = CsvLine(RatingCsvHeader());
  text += CsvLine({"song1_SGMSVS", "SGMSVS", "generative", "p1", "4", "2026-01-01T00:00:00Z", "2"});
  text += CsvLine({"gold-0-1", "GOLD", "gold", "p1", "5", "2026-01-01T00:00:05Z", "2"});
  const auto records = RatingsFromCsv(CsvTable::Parse(text));
  REQUIRE(records.size() == 2);
  CHECK(records[0].stimulus_id == "song1_SGMSVS");
  CHECK(records[0].rating == 4);
  CHECK(records[1].group_id == 2);
  CHECK(records[1].timestamp == "2026-01-01T00:00:05Z");
  std::string bad = CsvLine(RatingCsvHeader()) + CsvLine({"a", "HTDemucs", "discriminative", "p", "7", "t", "0"});
  CHECK(CodeOf([&] { RatingsFromCsv(CsvTable::Parse(bad)); }) == ErrorCode::kParseError);
}
