// include/svseval/service.hpp

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

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

// Eigen has to be seen before httplib: <resolv.h> defines a `_res` macro.
#include "svseval/svseval.hpp"

#include "httplib.h"
#include "json.hpp"
#include "svseval/audio.hpp"
#include "svseval/csv.hpp"
#include "svseval/error.hpp"
#include "svseval/loudness.hpp"
#include "svseval/study.hpp"

namespace svseval {

struct ServiceConfig {
  std::string bind_address = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "svseval-data";
  std::uint32_t study_seed = 0;
  double target_lufs = -18.0;
};

/// Reads the flat `key = value` subset of TOML used for service config:
/// bind_address, port, data_dir, study_seed, target_lufs. Unknown keys are
/// rejected.
inline ServiceConfig ParseServiceConfig(std::string_view text, ServiceConfig config = {}) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) Fail(ErrorCode::kParseError, "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    const bool is_string = value.size() >= 2 && value.front() == '"' && value.back() == '"';
    if (is_string) value = value.substr(1, value.size() - 2);
    if (key == "bind_address" && is_string) {
      config.bind_address = value;
    } else if (key == "data_dir" && is_string) {
      config.data_dir = value;
    } else if (key == "port" && !is_string) {
      config.port = static_cast<int>(ParseInteger(value));
    } else if (key == "study_seed" && !is_string) {
      config.study_seed = static_cast<std::uint32_t>(ParseInteger(value));
    } else if (key == "target_lufs" && !is_string) {
      config.target_lufs = ParseDouble(value);
    } else {
      Fail(ErrorCode::kParseError, "config line " + std::to_string(lineno) + ": unknown or mistyped key '" + key + "'");
    }
  }
  return config;
}

inline std::string Sha256Hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    Fail(ErrorCode::kIoError, "sha256 failed");
  }
  static const char *hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

inline std::string UtcTimestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

/// Append-only JSON-lines log. Every append is flushed and fsync'ed before
/// it returns.
class EventLog {
 public:
  EventLog() = default;
  explicit EventLog(const std::filesystem::path &path) : path_(path) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) Fail(ErrorCode::kIoError, "cannot open log " + path.string());
  }
  ~EventLog() {
    if (fd_ >= 0) ::close(fd_);
  }
  EventLog(const EventLog &) = delete;
  EventLog &operator=(const EventLog &) = delete;

  void Append(const nlohmann::json &event) {
    const std::string line = event.dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
      const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        Fail(ErrorCode::kIoError, "write to " + path_.string() + " failed");
      }
      written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) Fail(ErrorCode::kIoError, "fsync of " + path_.string() + " failed");
  }

  /// Parses all complete events. A torn trailing line (crash mid-write) is
  /// cut off so later appends start on a clean line.
  static std::vector<nlohmann::json> Replay(const std::filesystem::path &path) {
    std::vector<nlohmann::json> events;
    std::ifstream in(path, std::ios::binary);
    if (!in) return events;
    std::string content((std::istreambuf_iterator<char>(in)), {});
    in.close();
    std::size_t pos = 0, good = 0;
    while (pos < content.size()) {
      const auto nl = content.find('\n', pos);
      if (nl == std::string::npos) break;
      auto parsed = nlohmann::json::parse(content.begin() + static_cast<std::ptrdiff_t>(pos),
                                          content.begin() + static_cast<std::ptrdiff_t>(nl), nullptr, false);
      if (parsed.is_discarded()) break;
      events.push_back(std::move(parsed));
      pos = nl + 1;
      good = pos;
    }
    if (good < content.size()) {
      Warn("truncating torn tail of " + path.string());
      std::filesystem::resize_file(path, good);
    }
    return events;
  }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

/// HTTP-free outcome of a service call.
struct ServiceResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";

  static ServiceResponse Json(int status, const nlohmann::json &j) { return {status, j.dump(), "application/json"}; }
  static ServiceResponse Error(int status, std::string_view code, const std::string &message) {
    return Json(status, {{"error", code}, {"message", message}});
  }
};

inline StudyConfig StudyConfigFromJson(const nlohmann::json &j, std::uint32_t default_seed) {
  StudyConfig config;
  if (!j.is_object()) Fail(ErrorCode::kInvalidConfig, "study config must be an object");
  if (!j.contains("stimuli") || !j.at("stimuli").is_array()) Fail(ErrorCode::kInvalidConfig, "stimuli array required");
  for (const auto &s : j.at("stimuli")) {
    StimulusPair p;
    p.id = s.at("id").get<std::string>();
    p.reference_path = s.at("reference_path").get<std::string>();
    p.test_path = s.at("test_path").get<std::string>();
    p.model_label = s.at("model_label").get<std::string>();
    p.model_type = s.contains("model_type") ? ParseModelType(s.at("model_type").get<std::string>())
                                            : ModelTypeForLabel(p.model_label);
    config.stimuli.push_back(std::move(p));
  }
  config.group_count = j.value("group_count", config.group_count);
  config.gold_per_group = j.value("gold_per_group", config.gold_per_group);
  config.ratings_per_stimulus_target = j.value("ratings_per_stimulus_target", config.ratings_per_stimulus_target);
  config.rng_seed = j.value("rng_seed", default_seed);
  config.Validate();
  return config;
}

inline nlohmann::json StudyConfigToJson(const StudyConfig &config) {
  nlohmann::json stimuli = nlohmann::json::array();
  for (const auto &s : config.stimuli) {
    stimuli.push_back({{"id", s.id},
                       {"reference_path", s.reference_path},
                       {"test_path", s.test_path},
                       {"model_label", s.model_label},
                       {"model_type", ModelTypeName(s.model_type)}});
  }
  return {{"stimuli", stimuli},
          {"group_count", config.group_count},
          {"gold_per_group", config.gold_per_group},
          {"ratings_per_stimulus_target", config.ratings_per_stimulus_target},
          {"rng_seed", config.rng_seed}};
}

/// DCR study host. State lives in memory and is rebuilt from per-study event
/// logs on construction; every accepted mutation is durable before the
/// caller sees success.
class StudyService {
 public:
  explicit StudyService(ServiceConfig config) : config_(std::move(config)) {
    std::filesystem::create_directories(config_.data_dir / "studies");
    std::filesystem::create_directories(config_.data_dir / "audio");
    Recover();
  }

  void set_clock(std::function<std::string()> clock) { clock_ = std::move(clock); }
  const ServiceConfig &config() const { return config_; }

  ServiceResponse CreateStudy(const std::string &body) {
    StudyConfig config;
    StudyDesign design;
    std::map<std::string, std::string> audio;
    try {
      const auto j = nlohmann::json::parse(body);
      config = StudyConfigFromJson(j, config_.study_seed);
      design = BuildGroups(config);
      std::vector<const StimulusPair *> pairs;
      for (const auto &s : config.stimuli) pairs.push_back(&s);
      for (const auto &g : design.groups) {
        for (const auto &gold : g.gold) pairs.push_back(&gold);
      }
      std::map<std::string, std::set<std::string>> roles;  // path -> roles it is played in
      for (const auto *s : pairs) {
        roles[s->reference_path].insert("reference");
        roles[s->test_path].insert("test");
      }
      for (const auto &[path, used_as] : roles) {
        const std::string bytes = RenderAudio(path);
        for (const auto &role : used_as) audio[AudioKey(role, path)] = StoreAudio(role, bytes);
      }
    } catch (const nlohmann::json::exception &e) {
      return ServiceResponse::Error(422, "InvalidConfig", e.what());
    } catch (const Error &e) {
      return ServiceResponse::Error(422, ErrorName(e.code()), e.what());
    }

    std::unique_lock<std::mutex> create_lock(create_mu_);
    const std::string id = "study-" + std::to_string(next_study_number_++);
    const auto dir = config_.data_dir / "studies" / id;
    std::filesystem::create_directories(dir);
    auto study = std::make_shared<Study>();
    study->id = id;
    study->log = std::make_unique<EventLog>(dir / "events.jsonl");
    nlohmann::json event = {{"type", "study"}, {"study_id", id}, {"config", StudyConfigToJson(config)}, {"audio", audio}};
    study->log->Append(event);
    ApplyStudyEvent(*study, event);
    {
      std::unique_lock<std::shared_mutex> lock(studies_mu_);
      studies_[id] = study;
    }
    nlohmann::json groups = nlohmann::json::array();
    for (const auto &g : study->design.groups) {
      groups.push_back({{"group_id", g.group_id},
                        {"stimuli", g.stimulus_ids.size()},
                        {"gold", g.gold.size()},
                        {"session_length", study->design.session_length(g.group_id)}});
    }
    return ServiceResponse::Json(201, {{"study_id", id}, {"groups", groups}});
  }

  ServiceResponse CreateSession(const std::string &study_id, const std::string &body) {
    auto study = FindStudy(study_id);
    if (!study) return ServiceResponse::Error(404, "NotFound", "unknown study " + study_id);
    std::string participant;
    try {
      participant = nlohmann::json::parse(body).at("participant_id").get<std::string>();
    } catch (const nlohmann::json::exception &e) {
      return ServiceResponse::Error(422, "InvalidRequest", e.what());
    }
    if (participant.empty()) return ServiceResponse::Error(422, "InvalidRequest", "participant_id must not be empty");

    std::unique_lock<std::shared_mutex> lock(study->mu);
    std::set<int> done;
    for (const auto &[sid, s] : study->sessions) {
      if (s.participant_id == participant) done.insert(s.group_id);
    }
    std::vector<int> candidates;
    std::size_t least = SIZE_MAX;
    for (const auto &g : study->design.groups) {
      if (done.count(g.group_id)) continue;
      const std::size_t count = study->group_sessions[static_cast<std::size_t>(g.group_id)];
      if (count < least) {
        least = count;
        candidates.clear();
      }
      if (count == least) candidates.push_back(g.group_id);
    }
    if (candidates.empty()) {
      return ServiceResponse::Error(409, "NoGroupLeft", "participant already has a session in every group");
    }
    const std::uint64_t index = study->session_counter;
    IndexDraw tie_break(DeriveSeed(study->config.rng_seed ^ 0x5e55u, index));
    const int group = candidates[static_cast<std::size_t>(tie_break(candidates.size()))];
    const std::string session_id =
        Sha256Hex(study->id + "/" + std::to_string(study->config.rng_seed) + "/" + std::to_string(index)).substr(0, 24);
    nlohmann::json event = {{"type", "session"},
                            {"session_id", session_id},
                            {"participant_id", participant},
                            {"group_id", group},
                            {"index", index},
                            {"trial_order", SessionTrialOrder(study->design.groups[static_cast<std::size_t>(group)],
                                                              study->config.rng_seed, index)}};
    try {
      study->log->Append(event);
    } catch (const Error &e) {
      return ServiceResponse::Error(500, "IoError", e.what());
    }
    ApplySessionEvent(*study, event);
    {
      std::unique_lock<std::shared_mutex> idx(studies_mu_);
      session_index_[session_id] = study;
    }
    return ServiceResponse::Json(201, {{"session_id", session_id},
                                       {"group_id", group},
                                       {"trial_count", study->sessions.at(session_id).trial_order.size()}});
  }

  ServiceResponse NextTrial(const std::string &session_id) {
    auto study = FindStudyForSession(session_id);
    if (!study) return ServiceResponse::Error(404, "NotFound", "unknown session " + session_id);
    std::shared_lock<std::shared_mutex> lock(study->mu);
    const Session &s = study->sessions.at(session_id);
    if (s.cursor >= s.trial_order.size()) return {204, "", "application/json"};
    const StimulusPair &p = study->stimuli.at(s.trial_order[s.cursor]);
    return ServiceResponse::Json(200, {{"trial_index", s.cursor},
                                       {"reference_url", study->audio.at(AudioKey("reference", p.reference_path))},
                                       {"test_url", study->audio.at(AudioKey("test", p.test_path))},
                                       {"is_last", s.cursor + 1 == s.trial_order.size()}});
  }

  ServiceResponse SubmitRating(const std::string &session_id, const std::string &body) {
    auto study = FindStudyForSession(session_id);
    if (!study) return ServiceResponse::Error(404, "NotFound", "unknown session " + session_id);
    long long trial_index = 0, rating = 0;
    try {
      const auto j = nlohmann::json::parse(body);
      if (!j.at("trial_index").is_number_integer() || !j.at("rating").is_number_integer()) {
        return ServiceResponse::Error(422, "InvalidRequest", "trial_index and rating must be integers");
      }
      trial_index = j.at("trial_index").get<long long>();
      rating = j.at("rating").get<long long>();
    } catch (const nlohmann::json::exception &e) {
      return ServiceResponse::Error(422, "InvalidRequest", e.what());
    }
    if (rating < 1 || rating > 5) return ServiceResponse::Error(422, "InvalidRating", "rating must be in 1..5");

    std::unique_lock<std::shared_mutex> lock(study->mu);
    Session &s = study->sessions.at(session_id);
    if (trial_index < 0 || static_cast<std::size_t>(trial_index) != s.cursor) {
      const bool duplicate = trial_index >= 0 && static_cast<std::size_t>(trial_index) < s.cursor;
      return ServiceResponse::Error(409, duplicate ? "DuplicateRating" : "OutOfOrder",
                                    "expected trial_index " + std::to_string(s.cursor));
    }
    if (s.cursor >= s.trial_order.size()) return ServiceResponse::Error(409, "SessionComplete", "session is complete");
    nlohmann::json event = {{"type", "rating"},
                            {"session_id", session_id},
                            {"trial_index", trial_index},
                            {"stimulus_id", s.trial_order[s.cursor]},
                            {"rating", rating},
                            {"timestamp", clock_()}};
    try {
      study->log->Append(event);
    } catch (const Error &e) {
      return ServiceResponse::Error(500, "IoError", e.what());
    }
    ApplyRatingEvent(*study, event);
    return ServiceResponse::Json(201, {{"trial_index", trial_index}, {"accepted", true}});
  }

  ServiceResponse Export(const std::string &study_id) {
    auto study = FindStudy(study_id);
    if (!study) return ServiceResponse::Error(404, "NotFound", "unknown study " + study_id);
    std::shared_lock<std::shared_mutex> lock(study->mu);
    const auto screening = ScreenParticipants(study->ratings, study->gold_ids);
    const auto retained = RetainedParticipants(screening);
    std::vector<std::string> header = RatingCsvHeader();
    header.push_back("retained");
    std::string csv = CsvLine(header);
    for (const auto &r : study->ratings) {
      const StimulusPair &p = study->stimuli.at(r.stimulus_id);
      csv += CsvLine({r.stimulus_id, p.model_label, std::string(ModelTypeName(p.model_type)), r.participant_id,
                      std::to_string(r.rating), r.timestamp, std::to_string(r.group_id),
                      retained.count(r.participant_id) ? "true" : "false"});
    }
    return {200, csv, "text/csv; charset=utf-8"};
  }

  ServiceResponse Dmos(const std::string &study_id) {
    auto study = FindStudy(study_id);
    if (!study) return ServiceResponse::Error(404, "NotFound", "unknown study " + study_id);
    std::shared_lock<std::shared_mutex> lock(study->mu);
    const auto screening = ScreenParticipants(study->ratings, study->gold_ids);
    try {
      std::vector<std::string> expected;
      for (const auto &s : study->config.stimuli) expected.push_back(s.id);
      const auto summaries = ComputeDmos(study->ratings, RetainedParticipants(screening), study->gold_ids, expected);
      nlohmann::json out = nlohmann::json::array();
      for (const auto &s : summaries) {
        const StimulusPair &p = study->stimuli.at(s.stimulus_id);
        out.push_back({{"stimulus_id", s.stimulus_id},
                       {"model_label", p.model_label},
                       {"model_type", ModelTypeName(p.model_type)},
                       {"dmos", s.dmos},
                       {"n", s.n},
                       {"median", s.median},
                       {"ci_low", s.ci_low},
                       {"ci_high", s.ci_high}});
      }
      return ServiceResponse::Json(200, out);
    } catch (const Error &e) {
      return ServiceResponse::Error(422, ErrorName(e.code()), e.what());
    }
  }

  /// Serves a prepared rendition by its id.
  ServiceResponse Audio(const std::string &hash) {
    const auto path = config_.data_dir / "audio" / (hash + ".wav");
    std::ifstream in(path, std::ios::binary);
    if (!in) return ServiceResponse::Error(404, "NotFound", "unknown audio " + hash);
    return {200, std::string((std::istreambuf_iterator<char>(in)), {}), "audio/wav"};
  }

  void Bind(httplib::Server &server) {
    auto send = [](httplib::Response &res, const ServiceResponse &r) {
      res.status = r.status;
      if (r.status != 204) res.set_content(r.body, r.content_type);
    };
    server.Post("/studies", [this, send](const httplib::Request &req, httplib::Response &res) {
      send(res, CreateStudy(req.body));
    });
    server.Post(R"(/studies/([^/]+)/sessions)", [this, send](const httplib::Request &req, httplib::Response &res) {
      send(res, CreateSession(req.matches[1], req.body));
    });
    server.Get(R"(/sessions/([^/]+)/next)", [this, send](const httplib::Request &req, httplib::Response &res) {
      send(res, NextTrial(req.matches[1]));
    });
    server.Post(R"(/sessions/([^/]+)/ratings)", [this, send](const httplib::Request &req, httplib::Response &res) {
      send(res, SubmitRating(req.matches[1], req.body));
    });
    server.Get(R"(/studies/([^/]+)/export)", [this, send](const httplib::Request &req, httplib::Response &res) {
      send(res, Export(req.matches[1]));
    });
    server.Get(R"(/studies/([^/]+)/dmos)", [this, send](const httplib::Request &req, httplib::Response &res) {
      send(res, Dmos(req.matches[1]));
    });
    server.Get(R"(/audio/([0-9a-f]{64})\.wav)", [this, send](const httplib::Request &req, httplib::Response &res) {
      const ServiceResponse r = Audio(req.matches[1]);
      if (r.status == 200) res.set_header("Cache-Control", "public, max-age=31536000, immutable");
      send(res, r);
    });
    server.set_exception_handler([](const httplib::Request &, httplib::Response &res, std::exception_ptr ep) {
      std::string what = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception &e) {
        what = e.what();
      } catch (...) {
      }
      res.status = 500;
      res.set_content(nlohmann::json{{"error", "Internal"}, {"message", what}}.dump(), "application/json");
    });
  }

  std::size_t rating_count(const std::string &study_id) {
    auto study = FindStudy(study_id);
    if (!study) return 0;
    std::shared_lock<std::shared_mutex> lock(study->mu);
    return study->ratings.size();
  }

 private:
  struct Session {
    std::string session_id;
    std::string participant_id;
    int group_id = 0;
    std::vector<std::string> trial_order;
    std::size_t cursor = 0;
  };

  struct Study {
    std::string id;
    StudyConfig config;
    StudyDesign design;
    std::map<std::string, StimulusPair> stimuli;  // test and gold pairs
    std::set<std::string> gold_ids;
    std::map<std::string, std::string> audio;     // role:source path -> URL
    std::map<std::string, Session> sessions;
    std::vector<std::size_t> group_sessions;
    std::vector<RatingRecord> ratings;
    std::uint64_t session_counter = 0;
    std::unique_ptr<EventLog> log;
    std::shared_mutex mu;
  };

  static std::string AudioKey(std::string_view role, const std::string &path) {
    return std::string(role) + ":" + path;
  }

  std::string RenderAudio(const std::string &path) const {
    const AudioBuffer mono = LoadWavMono(path);
    const NormalizedAudio normalized = NormalizeLoudness(mono, config_.target_lufs);
    return EncodeWav(std::span<const AudioBuffer>(&normalized.audio, 1), WavEncoding::kFloat32);
  }

  // The id mixes in the role, so a gold pair's two URLs differ even though
  // they carry the same bytes.
  std::string StoreAudio(std::string_view role, const std::string &bytes) {
    const std::string hash = Sha256Hex(std::string(role) + "\n" + bytes);
    const auto dest = config_.data_dir / "audio" / (hash + ".wav");
    if (!std::filesystem::exists(dest)) {
      const auto tmp = dest.string() + ".tmp";
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) Fail(ErrorCode::kIoError, "cannot write " + tmp);
      }
      std::filesystem::rename(tmp, dest);
    }
    return "/audio/" + hash + ".wav";
  }

  static void ApplyStudyEvent(Study &study, const nlohmann::json &event) {
    study.config = StudyConfigFromJson(event.at("config"), 0);
    study.design = BuildGroups(study.config);
    for (const auto &s : study.config.stimuli) study.stimuli[s.id] = s;
    for (const auto &g : study.design.groups) {
      for (const auto &gold : g.gold) {
        study.stimuli[gold.id] = gold;
        study.gold_ids.insert(gold.id);
      }
    }
    study.audio = event.at("audio").get<std::map<std::string, std::string>>();
    study.group_sessions.assign(study.design.groups.size(), 0);
  }

  static void ApplySessionEvent(Study &study, const nlohmann::json &event) {
    Session s;
    s.session_id = event.at("session_id").get<std::string>();
    s.participant_id = event.at("participant_id").get<std::string>();
    s.group_id = event.at("group_id").get<int>();
    s.trial_order = event.at("trial_order").get<std::vector<std::string>>();
    study.group_sessions.at(static_cast<std::size_t>(s.group_id))++;
    study.session_counter = std::max(study.session_counter, event.at("index").get<std::uint64_t>() + 1);
    study.sessions[s.session_id] = std::move(s);
  }

  static void ApplyRatingEvent(Study &study, const nlohmann::json &event) {
    Session &s = study.sessions.at(event.at("session_id").get<std::string>());
    RatingRecord r;
    r.participant_id = s.participant_id;
    r.stimulus_id = event.at("stimulus_id").get<std::string>();
    r.rating = event.at("rating").get<int>();
    r.timestamp = event.at("timestamp").get<std::string>();
    r.group_id = s.group_id;
    study.ratings.push_back(std::move(r));
    s.cursor++;
  }

  void Recover() {
    for (const auto &entry : std::filesystem::directory_iterator(config_.data_dir / "studies")) {
      if (!entry.is_directory()) continue;
      const auto log_path = entry.path() / "events.jsonl";
      if (!std::filesystem::exists(log_path)) continue;
      const auto events = EventLog::Replay(log_path);
      if (events.empty() || events.front().value("type", "") != "study") {
        Warn("skipping study directory without a creation event: " + entry.path().string());
        continue;
      }
      auto study = std::make_shared<Study>();
      study->id = events.front().at("study_id").get<std::string>();
      ApplyStudyEvent(*study, events.front());
      for (std::size_t i = 1; i < events.size(); ++i) {
        const std::string type = events[i].value("type", "");
        if (type == "session") {
          ApplySessionEvent(*study, events[i]);
          session_index_[events[i].at("session_id").get<std::string>()] = study;
        } else if (type == "rating") {
          ApplyRatingEvent(*study, events[i]);
        }
      }
      study->log = std::make_unique<EventLog>(log_path);
      const std::string suffix = study->id.substr(study->id.find('-') + 1);
      next_study_number_ = std::max(next_study_number_, static_cast<int>(ParseInteger(suffix)) + 1);
      studies_[study->id] = study;
    }
  }

  std::shared_ptr<Study> FindStudy(const std::string &id) {
    std::shared_lock<std::shared_mutex> lock(studies_mu_);
    const auto it = studies_.find(id);
    return it == studies_.end() ? nullptr : it->second;
  }

  std::shared_ptr<Study> FindStudyForSession(const std::string &session_id) {
    std::shared_lock<std::shared_mutex> lock(studies_mu_);
    const auto it = session_index_.find(session_id);
    return it == session_index_.end() ? nullptr : it->second;
  }

  ServiceConfig config_;
  std::function<std::string()> clock_ = UtcTimestamp;
  std::mutex create_mu_;
  int next_study_number_ = 1;
  std::shared_mutex studies_mu_;
  std::map<std::string, std::shared_ptr<Study>> studies_;
  std::map<std::string, std::shared_ptr<Study>> session_index_;
};

}  // namespace svseval
