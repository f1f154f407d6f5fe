// tools/svseval.cpp

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

// svseval command line driver.
//
// Exit codes: 0 ok, 1 runtime failure, 2 usage error. Failures print a JSON
// object {"error": ..., "message": ...} on stderr.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "svseval/svseval.hpp"
#include "svseval/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace svseval;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int Report(int code, std::string_view kind, const std::string &message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
  return code;
}

std::string ReadText(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const fs::path &path, const std::string &text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) Fail(ErrorCode::kIoError, "cannot write " + path.string());
}

// "a,b,c" or "@file" with one id per line.
std::set<std::string> ParseIdList(const std::string &spec) {
  std::string text = spec;
  char sep = ',';
  if (!spec.empty() && spec[0] == '@') {
    text = ReadText(spec.substr(1));
    sep = '\n';
  }
  std::set<std::string> ids;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    while (!item.empty() && (item.back() == '\r' || item.back() == ' ' || item.back() == ',')) item.pop_back();
    while (!item.empty() && item.front() == ' ') item.erase(item.begin());
    if (!item.empty()) ids.insert(item);
  }
  return ids;
}

// DMOS per stimulus from either the dmos subcommand's JSON or a CSV with
// stimulus_id and dmos columns.
std::map<std::string, double> LoadDmos(const fs::path &path) {
  std::map<std::string, double> out;
  const std::string text = ReadText(path);
  if (path.extension() == ".json") {
    const json j = json::parse(text);
    const json &list = j.is_object() ? j.at("dmos") : j;
    for (const auto &e : list) out[e.at("stimulus_id").get<std::string>()] = e.at("dmos").get<double>();
    return out;
  }
  const CsvTable csv = CsvTable::Parse(text);
  for (std::size_t r = 0; r < csv.rows().size(); ++r) out[csv.at(r, "stimulus_id")] = ParseDouble(csv.at(r, "dmos"));
  return out;
}

std::string PreparedManifest(const JobManifest &manifest, const std::vector<PreparedStimulus> &report) {
  std::map<std::pair<std::string, std::string>, fs::path> outputs;
  for (const auto &p : report) outputs[{p.stimulus_id, p.role}] = fs::absolute(p.output);
  std::string csv = CsvLine({"stimulus_id", "reference", "estimate", "model_label", "model_type"});
  std::vector<const JobPair *> pairs;
  for (const auto &p : manifest.pairs) pairs.push_back(&p);
  std::sort(pairs.begin(), pairs.end(), [](auto *a, auto *b) { return a->stimulus_id < b->stimulus_id; });
  for (const JobPair *p : pairs) {
    csv += CsvLine({p->stimulus_id, outputs.at({p->stimulus_id, "reference"}).string(),
                    outputs.at({p->stimulus_id, "estimate"}).string(), p->model_label,
                    std::string(ModelTypeName(p->model_type))});
  }
  return csv;
}

int RunPrepare(const fs::path &in, const fs::path &out_dir, double target_lufs) {
  const JobManifest manifest = LoadJobManifest(in);
  const auto report = PrepareStimuli(manifest, out_dir, target_lufs);
  json j = json::array();
  for (const auto &p : report) {
    j.push_back({{"stimulus_id", p.stimulus_id},
                 {"role", p.role},
                 {"source", p.source.string()},
                 {"output", p.output.string()},
                 {"input_lufs", p.input_lufs},
                 {"output_lufs", p.output_lufs},
                 {"applied_gain_db", p.applied_gain_db}});
  }
  WriteText(out_dir / "manifest.csv", PreparedManifest(manifest, report));
  WriteText(out_dir / "gains.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << std::endl;
  return 0;
}

int RunMetrics(const fs::path &manifest_path, const std::string &metric_list, const fs::path &dmos_path,
               const fs::path &out, unsigned workers, const std::string &log_norm) {
  std::vector<MetricSpec> metrics;
  try {
    metrics = ParseMetricList(metric_list);
  } catch (const Error &e) {
    throw UsageError(e.what());
  }
  MetricOptions options;
  options.workers = workers;
  if (log_norm == "element") options.mrstft.log_normalization = LogTermNormalization::kPerElement;
  const JobManifest manifest = LoadJobManifest(manifest_path);
  const auto rows = ComputeMetrics(manifest, metrics, options);
  const auto dmos = dmos_path.empty() ? std::map<std::string, double>{} : LoadDmos(dmos_path);
  WriteText(out, MetricRowsCsv(rows, metrics, dmos));
  return 0;
}

int RunDmos(const fs::path &ratings_path, const std::string &gold_spec, std::uint32_t seed, int resamples,
            double confidence, const fs::path &out) {
  const auto records = RatingsFromCsv(CsvTable::Load(ratings_path));
  std::set<std::string> gold = ParseIdList(gold_spec);
  const auto screening = ScreenParticipants(records, gold);
  const auto retained = RetainedParticipants(screening);
  BootstrapOptions bootstrap;
  bootstrap.resamples = resamples;
  bootstrap.confidence = confidence;
  bootstrap.rng_seed = seed;
  const auto summaries = ComputeDmos(records, retained, gold, {}, bootstrap);

  json j;
  j["screening"] = json::array();
  for (const auto &s : screening) {
    j["screening"].push_back({{"participant_id", s.participant_id},
                              {"gold_ratings", s.gold_ratings},
                              {"gold_below_4", s.gold_below_threshold},
                              {"decision", s.decision == ScreeningDecision::kRetained ? "retained" : "excluded"}});
  }
  j["retained"] = retained.size();
  j["excluded"] = screening.size() - retained.size();
  j["dmos"] = json::array();
  for (const auto &s : summaries) {
    j["dmos"].push_back({{"stimulus_id", s.stimulus_id},
                         {"dmos", s.dmos},
                         {"n", s.n},
                         {"median", s.median},
                         {"ci_low", s.ci_low},
                         {"ci_high", s.ci_high}});
  }
  WriteText(out, j.dump(2) + "\n");
  return 0;
}

int RunCorrelate(const fs::path &table_path, const fs::path &directions_path, const fs::path &out_prefix,
                 bool svg) {
  const auto directions = ParseDirections(json::parse(ReadText(directions_path)));
  const MetricTable table = MetricTableFromCsv(CsvTable::Load(table_path), directions);
  const auto rows = TradeoffTable(table);
  if (out_prefix.empty()) {
    std::cout << TradeoffCsv(rows);
    return 0;
  }
  WriteText(out_prefix.string() + ".csv", TradeoffCsv(rows));
  WriteText(out_prefix.string() + ".json", TradeoffJson(rows).dump(2) + "\n");
  if (svg) WriteText(out_prefix.string() + ".svg", TradeoffSvg(rows));
  return 0;
}

int RunExcerpt(const fs::path &target_path, const fs::path &mixture_path, double seconds, double threshold,
               std::uint32_t seed, const fs::path &out_dir) {
  const auto target = LoadWav(target_path);
  const auto mixture = LoadWav(mixture_path);
  ExcerptOptions options;
  options.duration_s = seconds;
  options.threshold_db = threshold;
  options.rng_seed = seed;
  const std::size_t offset = SelectExcerpt(MixdownMono(target), MixdownMono(mixture), options);
  const auto window = static_cast<std::size_t>(std::llround(seconds * target.front().sample_rate));
  json j = {{"offset_samples", offset},
            {"offset_seconds", static_cast<double>(offset) / target.front().sample_rate},
            {"length_samples", window}};
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    auto cut = [&](const std::vector<AudioBuffer> &channels, const fs::path &path) {
      std::vector<AudioBuffer> out;
      for (const auto &c : channels) out.push_back(Slice(c, offset, window));
      WriteWav(path, out);
      return path.string();
    };
    j["target"] = cut(target, out_dir / ("target" + target_path.extension().string()));
    j["mixture"] = cut(mixture, out_dir / ("mixture" + mixture_path.extension().string()));
  }
  std::cout << j.dump() << std::endl;
  return 0;
}

httplib::Server *g_server = nullptr;

void StopServer(int) {
  if (g_server) g_server->stop();
}

int RunServe(const fs::path &config_path, const std::string &bind, int port, const std::string &data_dir,
             std::optional<std::uint32_t> seed) {
  ServiceConfig config;
  if (!config_path.empty()) config = ParseServiceConfig(ReadText(config_path));
  if (!bind.empty()) config.bind_address = bind;
  if (port >= 0) config.port = port;
  if (!data_dir.empty()) config.data_dir = data_dir;
  if (seed) config.study_seed = *seed;

  StudyService service(config);
  httplib::Server server;
  service.Bind(server);
  int bound = config.port;
  if (config.port == 0) {
    bound = server.bind_to_any_port(config.bind_address);
  } else if (!server.bind_to_port(config.bind_address, config.port)) {
    bound = -1;
  }
  if (bound < 0) Fail(ErrorCode::kIoError, "cannot bind " + config.bind_address + ":" + std::to_string(config.port));
  g_server = &server;
  std::signal(SIGINT, StopServer);
  std::signal(SIGTERM, StopServer);
  std::cout << json{{"listening", config.bind_address}, {"port", bound}}.dump() << std::endl;
  server.listen_after_bind();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Singing voice separation evaluation toolkit"};
  app.require_subcommand(1);

  auto *prepare = app.add_subcommand("prepare", "Mono mixdown and loudness normalization of a manifest");
  fs::path prepare_in, prepare_out = "prepared";
  double target_lufs = -18.0;
  prepare->add_option("--in", prepare_in, "Job manifest CSV")->required();
  prepare->add_option("--out", prepare_out, "Output directory");
  prepare->add_option("--target-lufs", target_lufs, "Integrated loudness target");

  auto *metrics = app.add_subcommand("metrics", "Compute objective metrics for a manifest");
  fs::path metrics_manifest, metrics_dmos, metrics_out;
  std::string metric_list = "si-sdr,sdr,mrstft";
  std::string log_norm = "frame";
  unsigned workers = 0;
  metrics->add_option("--manifest", metrics_manifest, "Job manifest CSV")->required();
  metrics->add_option("--metrics", metric_list, "Comma-separated metric names");
  metrics->add_option("--dmos", metrics_dmos, "DMOS JSON or CSV to join");
  metrics->add_option("--out", metrics_out, "Output CSV (default stdout)");
  metrics->add_option("--workers", workers, "Worker threads (0 = all cores)");
  metrics->add_option("--log-norm", log_norm, "MR-STFT log term normalization")
      ->check(CLI::IsMember({"frame", "element"}));

  auto *dmos = app.add_subcommand("dmos", "Screen participants and aggregate ratings");
  fs::path ratings_path, dmos_out;
  std::string gold_spec;
  std::uint32_t dmos_seed = 0;
  int resamples = 10000;
  double confidence = 0.95;
  dmos->add_option("--ratings", ratings_path, "Ratings CSV")->required();
  dmos->add_option("--gold", gold_spec, "Gold stimulus ids: a,b,c or @file")->required();
  dmos->add_option("--seed", dmos_seed, "Bootstrap seed");
  dmos->add_option("--resamples", resamples, "Bootstrap resamples")->check(CLI::PositiveNumber);
  dmos->add_option("--confidence", confidence, "Interval confidence")->check(CLI::Range(0.0, 0.999999));
  dmos->add_option("--out", dmos_out, "Output JSON (default stdout)");

  auto *correlate = app.add_subcommand("correlate", "Per-subset SRCC of each metric against DMOS");
  fs::path table_path, directions_path, correlate_out;
  bool svg = false;
  correlate->add_option("--table", table_path, "Metric table CSV")->required();
  correlate->add_option("--directions", directions_path, "Metric direction JSON")->required();
  correlate->add_option("--out", correlate_out, "Output prefix for .csv/.json(/.svg)");
  correlate->add_flag("--svg", svg, "Also write the scatter plot");

  auto *serve = app.add_subcommand("serve", "Run the listening test service");
  fs::path config_path;
  std::string bind, data_dir;
  int port = -1;
  std::optional<std::uint32_t> serve_seed;
  serve->add_option("--config", config_path, "Service config file");
  serve->add_option("--bind", bind, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)");
  serve->add_option("--data-dir", data_dir, "State directory");
  serve->add_option("--seed", serve_seed, "Default study seed");

  auto *excerpt = app.add_subcommand("excerpt", "Pick a non-silent excerpt of a target and its mixture");
  fs::path target_path, mixture_path, excerpt_out;
  double seconds = 5.0, threshold = -30.0;
  std::uint32_t excerpt_seed = 0;
  excerpt->add_option("--target", target_path, "Target stem WAV")->required();
  excerpt->add_option("--mixture", mixture_path, "Mixture WAV")->required();
  excerpt->add_option("--seconds", seconds, "Excerpt duration")->check(CLI::PositiveNumber);
  excerpt->add_option("--threshold", threshold, "RMS threshold in dBFS");
  excerpt->add_option("--seed", excerpt_seed, "Draw seed");
  excerpt->add_option("--out", excerpt_out, "Directory for the cut files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    return Report(2, "UsageError", e.what());
  }

  try {
    if (*prepare) return RunPrepare(prepare_in, prepare_out, target_lufs);
    if (*metrics) return RunMetrics(metrics_manifest, metric_list, metrics_dmos, metrics_out, workers, log_norm);
    if (*dmos) return RunDmos(ratings_path, gold_spec, dmos_seed, resamples, confidence, dmos_out);
    if (*correlate) return RunCorrelate(table_path, directions_path, correlate_out, svg);
    if (*serve) return RunServe(config_path, bind, port, data_dir, serve_seed);
    if (*excerpt) return RunExcerpt(target_path, mixture_path, seconds, threshold, excerpt_seed, excerpt_out);
  } catch (const UsageError &e) {
    return Report(2, "UsageError", e.what());
  } catch (const Error &e) {
    return Report(1, ErrorName(e.code()), e.what());
  } catch (const json::exception &e) {
    return Report(1, "ParseError", e.what());
  } catch (const std::exception &e) {
    return Report(1, "Internal", e.what());
  }
  return 2;
}
