// include/svseval/pipeline.hpp

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
#include <atomic>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "svseval/audio.hpp"
#include "svseval/bsseval.hpp"
#include "svseval/correlation.hpp"
#include "svseval/csv.hpp"
#include "svseval/embedding.hpp"
#include "svseval/error.hpp"
#include "svseval/loudness.hpp"
#include "svseval/spectral.hpp"
#include "svseval/study.hpp"

namespace svseval {

/// One reference/estimate pair of a job manifest. Paths are absolute after
/// loading.
struct JobPair {
  std::string stimulus_id;
  std::filesystem::path reference;
  std::filesystem::path estimate;
  std::vector<std::filesystem::path> interference;
  std::map<std::string, std::filesystem::path> reference_embeddings;  // encoder -> EMB1
  std::map<std::string, std::filesystem::path> estimate_embeddings;
  std::string model_label;
  ModelType model_type = ModelType::kDiscriminative;
};

struct JobManifest {
  std::vector<JobPair> pairs;
};

/// Manifest CSV columns: stimulus_id, reference, estimate, model_label,
/// optional model_type (else derived from the label), optional interference
/// (';'-separated paths), and optional ref_emb:<encoder> / est_emb:<encoder>.
/// Relative paths resolve against the manifest's directory.
inline JobManifest LoadJobManifest(const std::filesystem::path &path) {
  const CsvTable csv = CsvTable::Load(path);
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  auto resolve = [&base](const std::string &p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  auto require_file = [](const std::filesystem::path &p, const std::string &what) {
    if (!std::filesystem::is_regular_file(p)) Fail(ErrorCode::kIoError, what + " not found: " + p.string());
  };
  JobManifest manifest;
  std::set<std::string> ids;
  for (std::size_t r = 0; r < csv.rows().size(); ++r) {
    JobPair pair;
    pair.stimulus_id = csv.at(r, "stimulus_id");
    pair.model_label = csv.at(r, "model_label");
    if (pair.stimulus_id.empty() || pair.model_label.empty()) {
      Fail(ErrorCode::kParseError, "manifest row " + std::to_string(r + 2) + ": empty id or label");
    }
    if (!ids.insert(pair.stimulus_id).second) Fail(ErrorCode::kParseError, "duplicate stimulus id " + pair.stimulus_id);
    pair.model_type = csv.has_column("model_type") && !csv.at(r, "model_type").empty()
                          ? ParseModelType(csv.at(r, "model_type"))
                          : ModelTypeForLabel(pair.model_label);
    pair.reference = resolve(csv.at(r, "reference"));
    pair.estimate = resolve(csv.at(r, "estimate"));
    require_file(pair.reference, "reference");
    require_file(pair.estimate, "estimate");
    if (csv.has_column("interference")) {
      const std::string &field = csv.at(r, "interference");
      std::size_t start = 0;
      while (start < field.size()) {
        auto end = field.find(';', start);
        if (end == std::string::npos) end = field.size();
        if (end > start) {
          pair.interference.push_back(resolve(field.substr(start, end - start)));
          require_file(pair.interference.back(), "interference");
        }
        start = end + 1;
      }
    }
    for (const auto &col : csv.header()) {
      const bool ref = col.starts_with("ref_emb:");
      const bool est = col.starts_with("est_emb:");
      if (!ref && !est) continue;
      const std::string &value = csv.at(r, col);
      if (value.empty()) continue;
      const std::string encoder = col.substr(8);
      (ref ? pair.reference_embeddings : pair.estimate_embeddings)[encoder] = resolve(value);
    }
    manifest.pairs.push_back(std::move(pair));
  }
  return manifest;
}

enum class MetricKind { kSiSdr, kSdr, kSir, kSar, kMrStft, kFad, kMse };

struct MetricSpec {
  MetricKind kind = MetricKind::kSiSdr;
  std::string encoder;  // fad/mse only

  std::string name() const {
    switch (kind) {
      case MetricKind::kSiSdr: return "si-sdr";
      case MetricKind::kSdr: return "sdr";
      case MetricKind::kSir: return "sir";
      case MetricKind::kSar: return "sar";
      case MetricKind::kMrStft: return "mrstft";
      case MetricKind::kFad: return "fad:" + encoder;
      case MetricKind::kMse: return "mse:" + encoder;
    }
    return "";
  }
};

/// Parses "si-sdr,sdr,sir,sar,mrstft,fad:<enc>,mse:<enc>".
inline std::vector<MetricSpec> ParseMetricList(std::string_view list) {
  std::vector<MetricSpec> out;
  std::set<std::string> seen;
  std::size_t start = 0;
  while (start <= list.size()) {
    auto end = list.find(',', start);
    if (end == std::string_view::npos) end = list.size();
    const std::string token(list.substr(start, end - start));
    start = end + 1;
    if (token.empty()) continue;
    MetricSpec spec;
    if (token == "si-sdr") {
      spec.kind = MetricKind::kSiSdr;
    } else if (token == "sdr") {
      spec.kind = MetricKind::kSdr;
    } else if (token == "sir") {
      spec.kind = MetricKind::kSir;
    } else if (token == "sar") {
      spec.kind = MetricKind::kSar;
    } else if (token == "mrstft") {
      spec.kind = MetricKind::kMrStft;
    } else if ((token.starts_with("fad:") || token.starts_with("mse:")) && token.size() > 4) {
      spec.kind = token[0] == 'f' ? MetricKind::kFad : MetricKind::kMse;
      spec.encoder = token.substr(4);
    } else {
      Fail(ErrorCode::kInvalidConfig, "unknown metric '" + token + "'");
    }
    if (seen.insert(spec.name()).second) out.push_back(spec);
  }
  if (out.empty()) Fail(ErrorCode::kInvalidConfig, "no metrics requested");
  return out;
}

struct MetricOptions {
  ProjectionConfig projection;
  MrStftConfig mrstft;
  std::optional<double> fad_ridge;  // nullopt: relative default
  unsigned workers = 0;             // 0: hardware concurrency
};

/// Fails up front when a requested metric lacks its inputs.
inline void CheckManifestCoversMetrics(const JobManifest &manifest, const std::vector<MetricSpec> &metrics) {
  for (const auto &pair : manifest.pairs) {
    for (const auto &m : metrics) {
      if ((m.kind == MetricKind::kSir || m.kind == MetricKind::kSar) && pair.interference.empty()) {
        Fail(ErrorCode::kInvalidConfig, pair.stimulus_id + ": " + m.name() + " needs interference references");
      }
      if (m.kind == MetricKind::kFad || m.kind == MetricKind::kMse) {
        for (const auto *side : {&pair.reference_embeddings, &pair.estimate_embeddings}) {
          const auto it = side->find(m.encoder);
          if (it == side->end()) {
            Fail(ErrorCode::kIoError, pair.stimulus_id + ": no embedding file for encoder '" + m.encoder + "'");
          }
          if (!std::filesystem::is_regular_file(it->second)) {
            Fail(ErrorCode::kIoError, pair.stimulus_id + ": embedding file missing: " + it->second.string());
          }
        }
      }
    }
  }
}

inline MetricRow ComputePairMetrics(const JobPair &pair, const std::vector<MetricSpec> &metrics,
                                    const MetricOptions &options) {
  MetricRow row;
  row.stimulus_id = pair.stimulus_id;
  row.model_label = pair.model_label;
  row.model_type = pair.model_type;

  bool needs_audio = false, needs_bss = false;
  for (const auto &m : metrics) {
    needs_audio |= m.kind != MetricKind::kFad && m.kind != MetricKind::kMse;
    needs_bss |= m.kind == MetricKind::kSir || m.kind == MetricKind::kSar;
  }
  AudioBuffer reference, estimate;
  std::vector<AudioBuffer> interference;
  if (needs_audio) {
    reference = LoadWavMono(pair.reference);
    estimate = LoadWavMono(pair.estimate);
    if (needs_bss) {
      for (const auto &p : pair.interference) interference.push_back(LoadWavMono(p));
    }
  }
  std::optional<BssEvalResult> bss;
  std::map<std::string, EmbeddingSequence> embeddings;
  auto embedding = [&](const std::filesystem::path &p) -> const EmbeddingSequence & {
    auto it = embeddings.find(p.string());
    if (it == embeddings.end()) it = embeddings.emplace(p.string(), ReadEmbeddings(p)).first;
    return it->second;
  };

  for (const auto &m : metrics) {
    double value = 0.0;
    switch (m.kind) {
      case MetricKind::kSiSdr:
        value = SiSdr(estimate, reference, options.projection.db_cap);
        break;
      case MetricKind::kSdr:
        value = bss ? bss->sdr : SdrFir(estimate, reference, options.projection);
        break;
      case MetricKind::kSir:
      case MetricKind::kSar:
        if (!bss) bss = BssEvalSources(estimate, reference, interference, options.projection);
        value = m.kind == MetricKind::kSir ? *bss->sir : *bss->sar;
        break;
      case MetricKind::kMrStft:
        value = MrStftLoss(estimate, reference, options.mrstft).total;
        break;
      case MetricKind::kFad:
        value = FadSong2Song(embedding(pair.reference_embeddings.at(m.encoder)),
                             embedding(pair.estimate_embeddings.at(m.encoder)), options.fad_ridge);
        break;
      case MetricKind::kMse:
        value = EmbeddingMse(embedding(pair.reference_embeddings.at(m.encoder)),
                             embedding(pair.estimate_embeddings.at(m.encoder)));
        break;
    }
    row.values[m.name()] = value;
  }
  return row;
}

/// Evaluates every pair on a worker pool. Rows come back sorted by
/// stimulus id; on failure the error of the first failing pair (in id
/// order) is rethrown.
inline std::vector<MetricRow> ComputeMetrics(const JobManifest &manifest, const std::vector<MetricSpec> &metrics,
                                             const MetricOptions &options = {}) {
  CheckManifestCoversMetrics(manifest, metrics);
  std::vector<const JobPair *> pairs;
  for (const auto &p : manifest.pairs) pairs.push_back(&p);
  std::sort(pairs.begin(), pairs.end(), [](auto *a, auto *b) { return a->stimulus_id < b->stimulus_id; });

  std::vector<MetricRow> rows(pairs.size());
  std::vector<std::exception_ptr> errors(pairs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < pairs.size(); i = next++) {
      try {
        rows[i] = ComputePairMetrics(*pairs[i], metrics, options);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned count = options.workers ? options.workers : std::max(1u, std::thread::hardware_concurrency());
  count = static_cast<unsigned>(std::min<std::size_t>(count, std::max<std::size_t>(pairs.size(), 1)));
  std::vector<std::thread> threads;
  for (unsigned t = 1; t < count; ++t) threads.emplace_back(worker);
  worker();
  for (auto &t : threads) t.join();
  for (const auto &e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

/// Writes `stimulus_id,model_label,model_type,dmos,<metrics...>`. The dmos
/// column is left empty for stimuli without an entry in `dmos`.
inline std::string MetricRowsCsv(const std::vector<MetricRow> &rows, const std::vector<MetricSpec> &metrics,
                                 const std::map<std::string, double> &dmos = {}) {
  std::vector<std::string> header = MetricTableKeyColumns();
  for (const auto &m : metrics) header.push_back(m.name());
  std::string out = CsvLine(header);
  for (const auto &row : rows) {
    std::vector<std::string> fields{row.stimulus_id, row.model_label, std::string(ModelTypeName(row.model_type))};
    const auto it = dmos.find(row.stimulus_id);
    fields.push_back(it == dmos.end() ? "" : FormatDouble(it->second));
    for (const auto &m : metrics) fields.push_back(FormatDouble(row.values.at(m.name())));
    out += CsvLine(fields);
  }
  return out;
}

struct PreparedStimulus {
  std::string stimulus_id;
  std::string role;  // "reference" or "estimate"
  std::filesystem::path source;
  std::filesystem::path output;
  double input_lufs = 0.0;
  double output_lufs = 0.0;
  double applied_gain_db = 0.0;
};

/// Mono mixdown then loudness normalization of every reference and estimate.
/// Writes float32 WAVs named <stimulus_id>.<role>.wav into out_dir.
inline std::vector<PreparedStimulus> PrepareStimuli(const JobManifest &manifest, const std::filesystem::path &out_dir,
                                                    double target_lufs) {
  std::filesystem::create_directories(out_dir);
  std::vector<const JobPair *> pairs;
  for (const auto &p : manifest.pairs) pairs.push_back(&p);
  std::sort(pairs.begin(), pairs.end(), [](auto *a, auto *b) { return a->stimulus_id < b->stimulus_id; });
  std::vector<PreparedStimulus> report;
  for (const JobPair *pair : pairs) {
    for (const auto &[role, source] : {std::pair{"reference", pair->reference}, std::pair{"estimate", pair->estimate}}) {
      const AudioBuffer mono = LoadWavMono(source);
      const LoudnessResult before = IntegratedLoudness(mono);
      if (before.below_gate) Fail(ErrorCode::kAllBlocksGated, source.string() + " is below the loudness gate");
      const NormalizedAudio normalized = NormalizeLoudness(mono, target_lufs);
      PreparedStimulus p;
      p.stimulus_id = pair->stimulus_id;
      p.role = role;
      p.source = source;
      p.output = out_dir / (pair->stimulus_id + "." + role + ".wav");
      p.input_lufs = before.integrated_lufs;
      p.output_lufs = normalized.loudness.integrated_lufs;
      p.applied_gain_db = normalized.loudness.applied_gain_db;
      WriteWav(p.output, normalized.audio);
      report.push_back(std::move(p));
    }
  }
  return report;
}

}  // namespace svseval
