// include/svseval/correlation.hpp

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
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "svseval/csv.hpp"
#include "svseval/error.hpp"
#include "svseval/study.hpp"

namespace svseval {

/// Ascending 1-based ranks; ties share the mean of the ranks they cover.
inline std::vector<double> AverageRanks(std::span<const double> values) {
  if (values.empty()) Fail(ErrorCode::kEmptyInput, "ranks of empty input");
  for (double v : values) {
    if (!std::isfinite(v)) Fail(ErrorCode::kNonFiniteValue, "cannot rank non-finite values");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j hold ranks i+1..j+1.
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

/// Spearman's rho as the Pearson correlation of average ranks. Returns
/// nullopt when either rank vector is constant.
inline std::optional<double> Srcc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) Fail(ErrorCode::kLengthMismatch, "srcc inputs differ in length");
  if (x.size() < 3) Fail(ErrorCode::kTooFewPoints, "srcc needs at least three points");
  const std::vector<double> rx = AverageRanks(x);
  const std::vector<double> ry = AverageRanks(y);
  // Mean rank is (n + 1) / 2 regardless of ties.
  const double mean = 0.5 * static_cast<double>(x.size() + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = rx[i] - mean, dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

enum class MetricDirection { kHigherBetter, kLowerBetter };

struct MetricInfo {
  MetricDirection direction = MetricDirection::kHigherBetter;
  bool intrusive = true;
  bool embedding_based = false;
};

struct MetricRow {
  std::string stimulus_id;
  std::string model_label;
  ModelType model_type = ModelType::kDiscriminative;
  double dmos = 0.0;
  std::map<std::string, double> values;
};

/// Per-stimulus metric values joined with DMOS.
struct MetricTable {
  std::vector<std::string> metric_names;  // column order
  std::vector<MetricRow> rows;
  std::map<std::string, MetricInfo> metrics;

  void Validate() const {
    for (const auto &row : rows) {
      if (row.model_type == ModelType::kGold) Fail(ErrorCode::kInvalidConfig, "gold rows do not belong in a metric table");
      if (row.values.size() != metric_names.size()) Fail(ErrorCode::kInvalidConfig, "row " + row.stimulus_id + " lacks metrics");
      for (const auto &name : metric_names) {
        if (!row.values.count(name)) Fail(ErrorCode::kInvalidConfig, "row " + row.stimulus_id + " lacks " + name);
      }
    }
  }
};

inline bool IsEmbeddingMetricName(std::string_view name) {
  return name.starts_with("fad:") || name.starts_with("mse:");
}

/// Lower-is-better defaults for the metric names this library emits.
inline MetricInfo DefaultMetricInfo(std::string_view name) {
  MetricInfo info;
  info.embedding_based = IsEmbeddingMetricName(name);
  if (name == "mrstft" || info.embedding_based) info.direction = MetricDirection::kLowerBetter;
  return info;
}

inline MetricDirection ParseDirection(std::string_view s) {
  if (s == "higher_better") return MetricDirection::kHigherBetter;
  if (s == "lower_better") return MetricDirection::kLowerBetter;
  Fail(ErrorCode::kParseError, "unknown metric direction '" + std::string(s) + "'");
}

/// Direction manifest: {"metric": "lower_better"} or
/// {"metric": {"direction": ..., "intrusive": bool, "embedding_based": bool}}.
inline std::map<std::string, MetricInfo> ParseDirections(const nlohmann::json &manifest) {
  if (!manifest.is_object()) Fail(ErrorCode::kParseError, "direction manifest must be a JSON object");
  std::map<std::string, MetricInfo> out;
  for (const auto &[name, spec] : manifest.items()) {
    MetricInfo info = DefaultMetricInfo(name);
    if (spec.is_string()) {
      info.direction = ParseDirection(spec.get<std::string>());
    } else if (spec.is_object()) {
      if (!spec.contains("direction")) Fail(ErrorCode::kParseError, "metric " + name + " lacks a direction");
      info.direction = ParseDirection(spec.at("direction").get<std::string>());
      info.intrusive = spec.value("intrusive", info.intrusive);
      info.embedding_based = spec.value("embedding_based", info.embedding_based);
    } else {
      Fail(ErrorCode::kParseError, "bad manifest entry for " + name);
    }
    out[name] = info;
  }
  return out;
}

inline const std::vector<std::string> &MetricTableKeyColumns() {
  static const std::vector<std::string> cols{"stimulus_id", "model_label", "model_type", "dmos"};
  return cols;
}

/// Reads `stimulus_id,model_label,model_type,dmos,<metrics...>`. Every metric
/// column needs an entry in `directions`.
inline MetricTable MetricTableFromCsv(const CsvTable &csv, const std::map<std::string, MetricInfo> &directions) {
  MetricTable table;
  for (const auto &col : MetricTableKeyColumns()) csv.column(col);
  for (const auto &col : csv.header()) {
    if (std::find(MetricTableKeyColumns().begin(), MetricTableKeyColumns().end(), col) != MetricTableKeyColumns().end()) {
      continue;
    }
    const auto it = directions.find(col);
    if (it == directions.end()) Fail(ErrorCode::kParseError, "no direction given for metric '" + col + "'");
    table.metric_names.push_back(col);
    table.metrics[col] = it->second;
  }
  for (std::size_t r = 0; r < csv.rows().size(); ++r) {
    MetricRow row;
    row.stimulus_id = csv.at(r, "stimulus_id");
    row.model_label = csv.at(r, "model_label");
    row.model_type = ParseModelType(csv.at(r, "model_type"));
    if (csv.at(r, "dmos").empty()) Fail(ErrorCode::kParseError, "row " + row.stimulus_id + " has no dmos");
    row.dmos = ParseDouble(csv.at(r, "dmos"));
    for (const auto &name : table.metric_names) row.values[name] = ParseDouble(csv.at(r, name));
    table.rows.push_back(std::move(row));
  }
  table.Validate();
  return table;
}

struct TradeoffRow {
  std::string metric_name;
  std::optional<double> srcc_disc;  // nullopt: undefined (constant ranks)
  std::optional<double> srcc_gen;
  bool intrusive = true;
  bool embedding_based = false;
  std::size_t n_disc = 0;
  std::size_t n_gen = 0;
};

/// SRCC against DMOS per model family. Lower-is-better metrics have both
/// coefficients negated so that larger is always better aligned.
inline std::vector<TradeoffRow> TradeoffTable(const MetricTable &table) {
  table.Validate();
  std::vector<const MetricRow *> disc, gen;
  for (const auto &row : table.rows) (row.model_type == ModelType::kDiscriminative ? disc : gen).push_back(&row);
  if (disc.empty() || gen.empty()) Fail(ErrorCode::kMissingSubset, "table must contain both model types");
  // Stimulus order is canonicalized so row order never matters.
  auto by_id = [](const MetricRow *a, const MetricRow *b) { return a->stimulus_id < b->stimulus_id; };
  std::sort(disc.begin(), disc.end(), by_id);
  std::sort(gen.begin(), gen.end(), by_id);

  auto correlate = [](const std::vector<const MetricRow *> &rows, const std::string &name) {
    std::vector<double> metric, dmos;
    for (const auto *row : rows) {
      metric.push_back(row->values.at(name));
      dmos.push_back(row->dmos);
    }
    return Srcc(metric, dmos);
  };

  std::vector<TradeoffRow> out;
  for (const auto &name : table.metric_names) {
    const MetricInfo &info = table.metrics.at(name);
    TradeoffRow row;
    row.metric_name = name;
    row.intrusive = info.intrusive;
    row.embedding_based = info.embedding_based;
    row.n_disc = disc.size();
    row.n_gen = gen.size();
    row.srcc_disc = correlate(disc, name);
    row.srcc_gen = correlate(gen, name);
    if (info.direction == MetricDirection::kLowerBetter) {
      if (row.srcc_disc) row.srcc_disc = -*row.srcc_disc;
      if (row.srcc_gen) row.srcc_gen = -*row.srcc_gen;
    }
    out.push_back(std::move(row));
  }
  return out;
}

inline std::string OptionalToCsv(const std::optional<double> &v) { return v ? FormatDouble(*v) : "undefined"; }

inline std::string TradeoffCsv(const std::vector<TradeoffRow> &rows) {
  std::string out = CsvLine({"metric_name", "srcc_disc", "srcc_gen", "intrusive", "embedding_based", "n_disc", "n_gen"});
  for (const auto &r : rows) {
    out += CsvLine({r.metric_name, OptionalToCsv(r.srcc_disc), OptionalToCsv(r.srcc_gen), r.intrusive ? "true" : "false",
                    r.embedding_based ? "true" : "false", std::to_string(r.n_disc), std::to_string(r.n_gen)});
  }
  return out;
}

inline nlohmann::json TradeoffJson(const std::vector<TradeoffRow> &rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto &r : rows) {
    nlohmann::json j;
    j["metric_name"] = r.metric_name;
    j["srcc_disc"] = r.srcc_disc ? nlohmann::json(*r.srcc_disc) : nlohmann::json(nullptr);
    j["srcc_gen"] = r.srcc_gen ? nlohmann::json(*r.srcc_gen) : nlohmann::json(nullptr);
    j["intrusive"] = r.intrusive;
    j["embedding_based"] = r.embedding_based;
    j["n_disc"] = r.n_disc;
    j["n_gen"] = r.n_gen;
    out.push_back(std::move(j));
  }
  return out;
}

namespace svg {

inline std::string Escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace svg

/// Scatter of srcc_disc (x) against srcc_gen (y). Intrusive metrics are blue,
/// non-intrusive orange, embedding-based names carry a trailing '*', and the
/// best metric on each axis gets a larger marker. Undefined points are
/// skipped.
inline std::string TradeoffSvg(const std::vector<TradeoffRow> &rows) {
  constexpr double kWidth = 640, kHeight = 480, kMargin = 60;
  double lo = 0.0, hi = 1.0;
  for (const auto &r : rows) {
    if (r.srcc_disc && r.srcc_gen) {
      lo = std::min({lo, *r.srcc_disc, *r.srcc_gen});
      hi = std::max({hi, *r.srcc_disc, *r.srcc_gen});
    }
  }
  lo = std::floor(lo * 10.0) / 10.0;
  hi = std::ceil(hi * 10.0) / 10.0;
  auto px = [&](double v) { return kMargin + (v - lo) / (hi - lo) * (kWidth - 2 * kMargin); };
  auto py = [&](double v) { return kHeight - kMargin - (v - lo) / (hi - lo) * (kHeight - 2 * kMargin); };

  const TradeoffRow *best_disc = nullptr, *best_gen = nullptr;
  for (const auto &r : rows) {
    if (!r.srcc_disc || !r.srcc_gen) continue;
    if (!best_disc || *r.srcc_disc > *best_disc->srcc_disc) best_disc = &r;
    if (!best_gen || *r.srcc_gen > *best_gen->srcc_gen) best_gen = &r;
  }

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin << "\" y2=\""
    << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\"" << kHeight - kMargin
    << "\" stroke=\"black\"/>\n";
  for (double t = lo; t <= hi + 1e-9; t += 0.1) {
    const std::string label = FormatDouble(std::round(t * 10.0) / 10.0);
    s << "<text x=\"" << px(t) << "\" y=\"" << kHeight - kMargin + 16 << "\" text-anchor=\"middle\">" << label
      << "</text>\n";
    s << "<text x=\"" << kMargin - 8 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">" << label << "</text>\n";
  }
  s << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 15 << "\" text-anchor=\"middle\">SRCC_disc</text>\n";
  s << "<text x=\"15\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " << kHeight / 2
    << ")\">SRCC_gen</text>\n";
  for (const auto &r : rows) {
    if (!r.srcc_disc || !r.srcc_gen) continue;
    const double x = px(*r.srcc_disc), y = py(*r.srcc_gen);
    const bool best = &r == best_disc || &r == best_gen;
    s << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"" << (best ? 7 : 4) << "\" fill=\""
      << (r.intrusive ? "#1f77b4" : "#ff7f0e") << "\"/>\n";
    s << "<text x=\"" << x + 8 << "\" y=\"" << y - 6 << "\">" << svg::Escape(r.metric_name)
      << (r.embedding_based ? "*" : "") << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace svseval
