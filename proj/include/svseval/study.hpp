// include/svseval/study.hpp

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
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "svseval/csv.hpp"
#include "svseval/error.hpp"
#include "svseval/random.hpp"

namespace svseval {

enum class ModelType { kDiscriminative, kGenerative, kGold };

inline std::string_view ModelTypeName(ModelType t) {
  switch (t) {
    case ModelType::kDiscriminative: return "discriminative";
    case ModelType::kGenerative: return "generative";
    case ModelType::kGold: return "gold";
  }
  return "";
}

inline ModelType ParseModelType(std::string_view name) {
  if (name == "discriminative") return ModelType::kDiscriminative;
  if (name == "generative") return ModelType::kGenerative;
  if (name == "gold") return ModelType::kGold;
  Fail(ErrorCode::kParseError, "unknown model_type '" + std::string(name) + "'");
}

/// Separation systems rated in the study and the family each belongs to.
inline ModelType ModelTypeForLabel(std::string_view label) {
  static const std::array<std::pair<std::string_view, ModelType>, 6> kLabels{{
      {"HTDemucs", ModelType::kDiscriminative},
      {"MelRoFo(L)", ModelType::kDiscriminative},
      {"MelRoFo(S)", ModelType::kDiscriminative},
      {"MelRoFo(S)+BigVGAN", ModelType::kGenerative},
      {"SGMSVS", ModelType::kGenerative},
      {"GOLD", ModelType::kGold},
  }};
  for (const auto &[name, type] : kLabels) {
    if (name == label) return type;
  }
  Fail(ErrorCode::kInvalidConfig, "unknown model_label '" + std::string(label) + "'");
}

/// Five-point degradation scale, 5 = best.
inline constexpr std::array<std::string_view, 5> kDcrLabels{
    "Degradation is very annoying",
    "Degradation is annoying",
    "Degradation is slightly annoying",
    "Degradation is audible but not annoying",
    "Degradation is inaudible",
};

inline std::string_view DcrLabel(int rating) {
  if (rating < 1 || rating > 5) Fail(ErrorCode::kInvalidConfig, "DCR ratings are 1..5");
  return kDcrLabels[static_cast<std::size_t>(rating - 1)];
}

struct StimulusPair {
  std::string id;
  std::string reference_path;
  std::string test_path;
  std::string model_label;
  ModelType model_type = ModelType::kDiscriminative;

  void Validate() const {
    if (id.empty()) Fail(ErrorCode::kInvalidConfig, "stimulus id must not be empty");
    if (ModelTypeForLabel(model_label) != model_type) {
      Fail(ErrorCode::kInvalidConfig, "stimulus " + id + ": model_type does not match model_label");
    }
    if (model_type == ModelType::kGold && reference_path != test_path) {
      Fail(ErrorCode::kInvalidConfig, "gold pair " + id + " must compare a reference with itself");
    }
  }
};

struct StudyConfig {
  std::vector<StimulusPair> stimuli;
  int group_count = 3;
  int gold_per_group = 5;
  int ratings_per_stimulus_target = 12;
  std::uint32_t rng_seed = 0;

  void Validate() const {
    if (stimuli.empty()) Fail(ErrorCode::kInvalidConfig, "study has no stimuli");
    if (group_count < 1) Fail(ErrorCode::kInvalidConfig, "group_count must be >= 1");
    if (gold_per_group < 0) Fail(ErrorCode::kInvalidConfig, "gold_per_group must be >= 0");
    std::set<std::string> ids;
    for (const auto &s : stimuli) {
      s.Validate();
      if (s.model_type == ModelType::kGold) Fail(ErrorCode::kInvalidConfig, "gold pairs are generated, not configured");
      if (!ids.insert(s.id).second) Fail(ErrorCode::kInvalidConfig, "duplicate stimulus id " + s.id);
    }
  }
};

struct StudyGroup {
  int group_id = 0;
  std::vector<std::string> stimulus_ids;  // test stimuli, shuffled
  std::vector<StimulusPair> gold;         // reference/reference pairs
};

struct StudyDesign {
  std::vector<StudyGroup> groups;

  std::size_t session_length(int group_id) const {
    const auto &g = groups.at(static_cast<std::size_t>(group_id));
    return g.stimulus_ids.size() + g.gold.size();
  }
};

/// Shuffles the stimuli into near-equal groups (sizes differ by at most one,
/// larger groups last) and appends gold pairs drawn without replacement from
/// the distinct references.
inline StudyDesign BuildGroups(const StudyConfig &config) {
  config.Validate();
  IndexDraw draw(config.rng_seed);
  std::vector<std::size_t> order(config.stimuli.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  draw.Shuffle(order);

  std::vector<std::string> references;
  std::set<std::string> seen;
  for (const auto &s : config.stimuli) {
    if (seen.insert(s.reference_path).second) references.push_back(s.reference_path);
  }
  const auto groups = static_cast<std::size_t>(config.group_count);
  const auto gold_total = groups * static_cast<std::size_t>(config.gold_per_group);
  if (references.size() < gold_total) {
    Fail(ErrorCode::kNotEnoughGoldCandidates, "need " + std::to_string(gold_total) + " distinct references, have " +
                                                  std::to_string(references.size()));
  }
  draw.Shuffle(references);

  StudyDesign design;
  const std::size_t base = order.size() / groups;
  const std::size_t extra = order.size() % groups;
  std::size_t cursor = 0, gold_cursor = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    StudyGroup group;
    group.group_id = static_cast<int>(g);
    const std::size_t size = base + (g >= groups - extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) group.stimulus_ids.push_back(config.stimuli[order[cursor++]].id);
    for (int k = 0; k < config.gold_per_group; ++k) {
      StimulusPair gold;
      gold.id = "gold-" + std::to_string(g) + "-" + std::to_string(k);
      gold.reference_path = gold.test_path = references[gold_cursor++];
      gold.model_label = "GOLD";
      gold.model_type = ModelType::kGold;
      group.gold.push_back(std::move(gold));
    }
    design.groups.push_back(std::move(group));
  }
  return design;
}

/// Independent presentation order for one session of a group.
inline std::vector<std::string> SessionTrialOrder(const StudyGroup &group, std::uint32_t study_seed,
                                                  std::uint64_t session_index) {
  std::vector<std::string> trials = group.stimulus_ids;
  for (const auto &g : group.gold) trials.push_back(g.id);
  IndexDraw draw(DeriveSeed(study_seed, session_index));
  draw.Shuffle(trials);
  return trials;
}

struct RatingRecord {
  std::string participant_id;
  std::string stimulus_id;
  int rating = 0;
  std::string timestamp;
  int group_id = 0;
};

enum class ScreeningDecision { kRetained, kExcluded };

inline constexpr int kGoldAcceptableRating = 4;
inline constexpr int kMaxGoldMisses = 3;

/// Excluded iff more than three gold ratings fall below 4.
inline ScreeningDecision ScreenParticipant(const std::vector<int> &gold_ratings) {
  const auto misses = std::count_if(gold_ratings.begin(), gold_ratings.end(),
                                    [](int r) { return r < kGoldAcceptableRating; });
  return misses > kMaxGoldMisses ? ScreeningDecision::kExcluded : ScreeningDecision::kRetained;
}

struct ParticipantScreening {
  std::string participant_id;
  ScreeningDecision decision = ScreeningDecision::kRetained;
  int gold_ratings = 0;
  int gold_below_threshold = 0;
  int test_ratings = 0;
  double rating_variance = 0.0;  // over test ratings; logged, not used
};

inline std::vector<ParticipantScreening> ScreenParticipants(const std::vector<RatingRecord> &records,
                                                            const std::set<std::string> &gold_ids) {
  std::map<std::string, std::vector<int>> gold, test;
  for (const auto &r : records) {
    (gold_ids.count(r.stimulus_id) ? gold : test)[r.participant_id].push_back(r.rating);
    gold[r.participant_id];
    test[r.participant_id];
  }
  std::vector<ParticipantScreening> out;
  for (const auto &[pid, golds] : gold) {
    ParticipantScreening s;
    s.participant_id = pid;
    s.decision = ScreenParticipant(golds);
    s.gold_ratings = static_cast<int>(golds.size());
    s.gold_below_threshold = static_cast<int>(
        std::count_if(golds.begin(), golds.end(), [](int r) { return r < kGoldAcceptableRating; }));
    const auto &t = test[pid];
    s.test_ratings = static_cast<int>(t.size());
    if (t.size() > 1) {
      double mean = 0.0;
      for (int v : t) mean += v;
      mean /= static_cast<double>(t.size());
      double ss = 0.0;
      for (int v : t) ss += (v - mean) * (v - mean);
      s.rating_variance = ss / static_cast<double>(t.size() - 1);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::set<std::string> RetainedParticipants(const std::vector<ParticipantScreening> &screening) {
  std::set<std::string> out;
  for (const auto &s : screening) {
    if (s.decision == ScreeningDecision::kRetained) out.insert(s.participant_id);
  }
  return out;
}

/// Sample median; the mean of the middle pair for even counts.
inline double Median(std::vector<double> values) {
  if (values.empty()) Fail(ErrorCode::kEmptyInput, "median of empty input");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Linear-interpolation quantile of sorted data (position q * (n - 1)).
inline double SortedQuantile(const std::vector<double> &sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct BootstrapOptions {
  int resamples = 10000;
  double confidence = 0.95;
  std::uint32_t rng_seed = 0;
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Percentile bootstrap interval for the median. Each resample draws n
/// indices with IndexDraw; the interval is widened if needed so that it
/// always contains the sample median, and collapses onto it at confidence 0.
inline Interval BootstrapMedianCi(const std::vector<double> &values, const BootstrapOptions &options = {}) {
  if (values.empty()) Fail(ErrorCode::kEmptyInput, "bootstrap of empty input");
  if (options.resamples < 1) Fail(ErrorCode::kInvalidConfig, "resamples must be >= 1");
  if (!(options.confidence >= 0.0 && options.confidence < 1.0)) {
    Fail(ErrorCode::kInvalidConfig, "confidence must be in [0, 1)");
  }
  const double median = Median(values);
  if (options.confidence == 0.0) return {median, median};

  IndexDraw draw(options.rng_seed);
  std::vector<double> medians(static_cast<std::size_t>(options.resamples));
  std::vector<double> sample(values.size());
  for (auto &m : medians) {
    for (auto &s : sample) s = values[static_cast<std::size_t>(draw(values.size()))];
    m = Median(sample);
  }
  std::sort(medians.begin(), medians.end());
  const double alpha = 0.5 * (1.0 - options.confidence);
  return {std::min(SortedQuantile(medians, alpha), median), std::max(SortedQuantile(medians, 1.0 - alpha), median)};
}

struct DmosSummary {
  std::string stimulus_id;
  double dmos = 0.0;
  int n = 0;
  double median = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

inline std::uint32_t StableHash(std::string_view text) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : text) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

/// Per-stimulus mean over retained participants' ratings. Gold pairs are not
/// reported. Output is sorted by stimulus id; bootstrap seeds derive from the
/// base seed and the stimulus id, so record order never matters.
inline std::vector<DmosSummary> ComputeDmos(const std::vector<RatingRecord> &records,
                                            const std::set<std::string> &retained,
                                            const std::set<std::string> &gold_ids,
                                            const std::vector<std::string> &expected_stimuli = {},
                                            const BootstrapOptions &bootstrap = {}) {
  std::map<std::string, std::vector<double>> ratings;
  for (const auto &id : expected_stimuli) {
    if (!gold_ids.count(id)) ratings[id];
  }
  for (const auto &r : records) {
    if (gold_ids.count(r.stimulus_id)) continue;
    if (r.rating < 1 || r.rating > 5) Fail(ErrorCode::kInvalidConfig, "rating outside 1..5");
    auto &bucket = ratings[r.stimulus_id];
    if (retained.count(r.participant_id)) bucket.push_back(r.rating);
  }
  std::vector<DmosSummary> out;
  for (auto &[id, values] : ratings) {
    if (values.empty()) Fail(ErrorCode::kUnratedStimulus, "stimulus " + id + " has no retained rating");
    std::sort(values.begin(), values.end());
    DmosSummary s;
    s.stimulus_id = id;
    s.n = static_cast<int>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.dmos = sum / static_cast<double>(values.size());
    s.median = Median(values);
    BootstrapOptions opts = bootstrap;
    opts.rng_seed = DeriveSeed(bootstrap.rng_seed, StableHash(id));
    const Interval ci = BootstrapMedianCi(values, opts);
    s.ci_low = ci.low;
    s.ci_high = ci.high;
    out.push_back(std::move(s));
  }
  return out;
}

// Export schema shared by the service and the dmos subcommand.
inline const std::vector<std::string> &RatingCsvHeader() {
  static const std::vector<std::string> header{"stimulus_id", "model_label", "model_type", "participant_id",
                                               "rating",      "timestamp",   "group_id"};
  return header;
}

inline std::vector<RatingRecord> RatingsFromCsv(const CsvTable &table) {
  std::vector<RatingRecord> out;
  for (std::size_t r = 0; r < table.rows().size(); ++r) {
    RatingRecord rec;
    rec.stimulus_id = table.at(r, "stimulus_id");
    rec.participant_id = table.at(r, "participant_id");
    rec.rating = static_cast<int>(ParseInteger(table.at(r, "rating")));
    rec.timestamp = table.at(r, "timestamp");
    rec.group_id = static_cast<int>(ParseInteger(table.at(r, "group_id")));
    if (rec.rating < 1 || rec.rating > 5) Fail(ErrorCode::kParseError, "rating outside 1..5 in row " + std::to_string(r + 2));
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace svseval
