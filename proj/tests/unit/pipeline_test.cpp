// tests/unit/pipeline_test.cpp

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

#include <sys/wait.h>

#include <fstream>
#include <sstream>

#include "catch_amalgamated.hpp"
#include "json.hpp"
#include "svseval/svseval.hpp"
#include "test_util.hpp"

using namespace svseval;
using svseval::testing::TempDir;
using Catch::Matchers::WithinAbs;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string Slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void Spit(const std::filesystem::path &p, const std::string &text) { std::ofstream(p, std::ios::binary) << text; }

CliResult Cli(const TempDir &dir, const std::string &args) {
  const auto out = dir / "cli.stdout", err = dir / "cli.stderr";
  const std::string cmd = std::string("'") + SVSEVAL_CLI + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = Slurp(out);
  r.err = Slurp(err);
  return r;
}

// Two songs, three systems each; estimate quality drops with the system index.
void WriteFixture(const TempDir &dir) {
  const std::array<std::string, 3> models{"HTDemucs", "MelRoFo(S)", "SGMSVS"};
  std::string manifest = CsvLine({"stimulus_id", "reference", "estimate", "model_label", "ref_emb:toy", "est_emb:toy"});
  for (int song = 0; song < 2; ++song) {
    const std::string ref = "song" + std::to_string(song) + ".wav";
    const auto clean = svseval::testing::Sine(16000, 220.0 * (song + 1), 16000, 0.3);
    WriteWav(dir / ref, svseval::testing::Buffer(clean, 16000), WavEncoding::kFloat32);
    EmbeddingSequence ref_emb;
    ref_emb.encoder_id = "toy";
    ref_emb.frames = Eigen::MatrixXf::Random(30, 4);
    WriteEmbeddings(ref_emb, dir / (ref + ".emb"));
    for (std::size_t m = 0; m < models.size(); ++m) {
      const std::string id = "song" + std::to_string(song) + "_" + std::to_string(m);
      auto est = clean;
      const auto noise = svseval::testing::Noise(est.size(), 10 * song + m, 0.01 * static_cast<double>(m + 1));
      for (std::size_t i = 0; i < est.size(); ++i) est[i] += noise[i];
      WriteWav(dir / (id + ".wav"), svseval::testing::Buffer(est, 16000), WavEncoding::kFloat32);
      EmbeddingSequence est_emb = ref_emb;
      est_emb.frames.array() += 0.1f * static_cast<float>(m);
      WriteEmbeddings(est_emb, dir / (id + ".emb"));
      manifest += CsvLine({id, ref, id + ".wav", models[m], ref + ".emb", id + ".emb"});
    }
  }
  Spit(dir / "manifest.csv", manifest);
}

}  // namespace

TEST_CASE("identical pair scores perfectly", "[pipeline]") {
  TempDir dir;
  const auto x = svseval::testing::Noise(8000, 3, 0.2);
  WriteWav(dir / "a.wav", svseval::testing::Buffer(x, 16000), WavEncoding::kFloat32);
  EmbeddingSequence e;
  e.encoder_id = "toy";
  e.frames = Eigen::MatrixXf::Random(10, 3);
  WriteEmbeddings(e, dir / "a.emb");
  Spit(dir / "m.csv", "stimulus_id,reference,estimate,model_label,ref_emb:toy,est_emb:toy\n"
                      "s,a.wav,a.wav,HTDemucs,a.emb,a.emb\n");
  const auto r = Cli(dir, "metrics --manifest '" + (dir / "m.csv").string() + "' --metrics si-sdr,sdr,mrstft,mse:toy");
  REQUIRE(r.exit_code == 0);
  const CsvTable t = CsvTable::Parse(r.out);
  REQUIRE(t.rows().size() == 1);
  CHECK(t.at(0, "model_type") == "discriminative");
  CHECK(t.at(0, "dmos").empty());
  CHECK(ParseDouble(t.at(0, "si-sdr")) == 300.0);
  CHECK(ParseDouble(t.at(0, "sdr")) == 300.0);
  CHECK(ParseDouble(t.at(0, "mrstft")) == 0.0);
  CHECK(ParseDouble(t.at(0, "mse:toy")) == 0.0);
}

TEST_CASE("six stimulus fixture", "[pipeline]") {
  TempDir dir;
  WriteFixture(dir);
  const std::string manifest = (dir / "manifest.csv").string();
  const auto r = Cli(dir, "metrics --manifest '" + manifest + "' --metrics si-sdr,mrstft,fad:toy,mse:toy --workers 3");
  REQUIRE(r.exit_code == 0);
  const CsvTable t = CsvTable::Parse(r.out);
  REQUIRE(t.rows().size() == 6);
  CHECK(t.header() == std::vector<std::string>{"stimulus_id", "model_label", "model_type", "dmos", "si-sdr", "mrstft",
                                               "fad:toy", "mse:toy"});
  CHECK(t.at(5, "stimulus_id") == "song1_2");
  CHECK(t.at(5, "model_type") == "generative");
  // More noise, lower SI-SDR; larger embedding shift, larger MSE (0.1 m)^2.
  for (std::size_t song = 0; song < 2; ++song) {
    const std::size_t r0 = 3 * song;
    CHECK(ParseDouble(t.at(r0, "si-sdr")) > ParseDouble(t.at(r0 + 1, "si-sdr")));
    CHECK(ParseDouble(t.at(r0 + 1, "si-sdr")) > ParseDouble(t.at(r0 + 2, "si-sdr")));
    CHECK_THAT(ParseDouble(t.at(r0 + 2, "mse:toy")), WithinAbs(0.04, 1e-6));
    // Translation only moves the mean: FAD = shift^2 * dims.
    CHECK_THAT(ParseDouble(t.at(r0 + 1, "fad:toy")), WithinAbs(0.04, 1e-5));
  }

  SECTION("repeat runs are byte identical") {
    const auto again = Cli(dir, "metrics --manifest '" + manifest + "' --metrics si-sdr,mrstft,fad:toy,mse:toy --workers 1");
    CHECK(again.out == r.out);
  }

  SECTION("dmos join and correlate") {
    Spit(dir / "dmos.csv", "stimulus_id,dmos\nsong0_0,4.5\nsong0_1,3.5\nsong0_2,2\nsong1_0,4\nsong1_1,3\nsong1_2,1.5\n");
    const auto joined = Cli(dir, "metrics --manifest '" + manifest + "' --metrics si-sdr,mrstft --dmos '" +
                                     (dir / "dmos.csv").string() + "' --out '" + (dir / "table.csv").string() + "'");
    REQUIRE(joined.exit_code == 0);
    Spit(dir / "dirs.json", R"({"si-sdr": "higher_better", "mrstft": "lower_better"})");
    CHECK(CsvTable::Load(dir / "table.csv").at(2, "dmos") == "2");
    const std::string dirs = " --directions '" + (dir / "dirs.json").string() + "'";
    // Only two generative rows: too few for a rank correlation.
    auto corr = Cli(dir, "correlate --table '" + (dir / "table.csv").string() + "'" + dirs);
    CHECK(corr.exit_code == 1);
    CHECK(nlohmann::json::parse(corr.err)["error"] == "TooFewPoints");

    std::string table = Slurp(dir / "table.csv");
    table += "extra_0,SGMSVS,generative,3,5,1\nextra_1,SGMSVS,generative,1,-2,4\n";
    Spit(dir / "table.csv", table);
    corr = Cli(dir, "correlate --table '" + (dir / "table.csv").string() + "'" + dirs + " --out '" +
                        (dir / "trade").string() + "' --svg");
    REQUIRE(corr.exit_code == 0);
    const auto json = nlohmann::json::parse(Slurp(dir / "trade.json"));
    REQUIRE(json.size() == 2);
    CHECK(json[0]["metric_name"] == "si-sdr");
    CHECK(json[0]["n_disc"] == 4);
    CHECK(json[0]["n_gen"] == 4);
    CHECK(json[0]["srcc_disc"].get<double>() > 0.5);
    CHECK(std::filesystem::exists(dir / "trade.svg"));
    CHECK(std::filesystem::exists(dir / "trade.csv"));
  }
}

TEST_CASE("unknown metric is a usage error", "[pipeline]") {
  TempDir dir;
  WriteFixture(dir);
  const auto r = Cli(dir, "metrics --manifest '" + (dir / "manifest.csv").string() + "' --metrics si-sdr,pesq");
  CHECK(r.exit_code == 2);
  const auto err = nlohmann::json::parse(r.err);
  CHECK(err.contains("error"));
  CHECK(err["message"].get<std::string>().find("pesq") != std::string::npos);
  CHECK(Cli(dir, "metrics").exit_code == 2);
  CHECK(Cli(dir, "frobnicate").exit_code == 2);
}

TEST_CASE("missing inputs fail with a named error", "[pipeline]") {
  TempDir dir;
  WriteFixture(dir);
  std::filesystem::remove(dir / "song1_1.emb");
  auto r = Cli(dir, "metrics --manifest '" + (dir / "manifest.csv").string() + "' --metrics fad:toy");
  CHECK(r.exit_code == 1);
  CHECK(nlohmann::json::parse(r.err)["error"] == "IoError");
  r = Cli(dir, "metrics --manifest '" + (dir / "manifest.csv").string() + "' --metrics fad:other");
  CHECK(r.exit_code == 1);
  std::filesystem::remove(dir / "song0_0.wav");
  r = Cli(dir, "metrics --manifest '" + (dir / "manifest.csv").string() + "' --metrics si-sdr");
  CHECK(r.exit_code == 1);
  CHECK(nlohmann::json::parse(r.err)["error"] == "IoError");
}

TEST_CASE("prepare normalizes to the target loudness", "[pipeline]") {
  TempDir dir;
  WriteFixture(dir);
  const auto r = Cli(dir, "prepare --in '" + (dir / "manifest.csv").string() + "' --out '" + (dir / "prep").string() +
                              "' --target-lufs -23");
  REQUIRE(r.exit_code == 0);
  const auto report = nlohmann::json::parse(r.out);
  CHECK(report.size() == 12);
  for (const auto &e : report) {
    CHECK_THAT(e["output_lufs"].get<double>(), WithinAbs(-23.0, 0.05));
    CHECK_THAT(IntegratedLoudness(LoadWavMono(e["output"].get<std::string>())).integrated_lufs, WithinAbs(-23.0, 0.05));
  }
  const auto metrics = Cli(dir, "metrics --manifest '" + (dir / "prep" / "manifest.csv").string() + "' --metrics si-sdr");
  REQUIRE(metrics.exit_code == 0);
  CHECK(CsvTable::Parse(metrics.out).rows().size() == 6);
}

TEST_CASE("dmos subcommand", "[pipeline]") {
  TempDir dir;
  std::string csv = CsvLine(RatingCsvHeader());
  const std::vector<int> good_gold{5, 5, 4, 5, 3}, bad_gold{2, 2, 3, 1, 5};
  for (int k = 0; k < 5; ++k) {
    const std::string gid = "gold-0-" + std::to_string(k);
    csv += CsvLine({gid, "GOLD", "gold", "p1", std::to_string(good_gold[k]), "t", "0"});
    csv += CsvLine({gid, "GOLD", "gold", "p2", std::to_string(bad_gold[k]), "t", "0"});
  }
  csv += CsvLine({"a", "HTDemucs", "discriminative", "p1", "4", "t", "0"});
  csv += CsvLine({"a", "HTDemucs", "discriminative", "p2", "1", "t", "0"});
  Spit(dir / "ratings.csv", csv);
  Spit(dir / "gold.txt", "gold-0-0\ngold-0-1\ngold-0-2\ngold-0-3\ngold-0-4\n");
  const auto r = Cli(dir, "dmos --ratings '" + (dir / "ratings.csv").string() + "' --gold @'" +
                              (dir / "gold.txt").string() + "' --seed 1 --resamples 100");
  REQUIRE(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["retained"] == 1);
  CHECK(j["excluded"] == 1);
  CHECK(j["screening"][1]["decision"] == "excluded");
  CHECK(j["screening"][1]["gold_below_4"] == 4);
  REQUIRE(j["dmos"].size() == 1);
  CHECK(j["dmos"][0]["dmos"] == 4.0);
}

TEST_CASE("excerpt subcommand replays the draw", "[pipeline]") {
  TempDir dir;
  std::vector<double> target(20000, 0.0);
  for (std::size_t i = 10000; i < target.size(); ++i) target[i] = 0.5;
  WriteWav(dir / "t.wav", svseval::testing::Buffer(target, 1000), WavEncoding::kFloat32);
  WriteWav(dir / "m.wav", svseval::testing::Buffer(target, 1000), WavEncoding::kFloat32);
  const auto r = Cli(dir, "excerpt --target '" + (dir / "t.wav").string() + "' --mixture '" + (dir / "m.wav").string() +
                              "' --seconds 5 --threshold -30 --seed 42 --out '" + (dir / "cut").string() + "'");
  REQUIRE(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["offset_samples"] == 5618);
  CHECK(j["length_samples"] == 5000);
  CHECK(LoadWavMono(j["target"].get<std::string>()).size() == 5000);
}
