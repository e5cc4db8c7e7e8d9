/* Copyright 2026 The Empath Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "empath/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <map>
#include <sstream>

#include <httplib.h>

namespace empath::service {

namespace {

template <typename F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

nlohmann::json distribution_json(const EmotionDistribution& d) {
  nlohmann::json out = nlohmann::json::object();
  for (Emotion e : ser::kAllEmotions) out[std::string(ser::to_string(e))] = d.probability(e);
  return out;
}

std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Accepts a flat JSON object or `key = value` lines (# comments, optional
// double quotes around values).
std::map<std::string, std::string> read_key_values(std::string_view text) {
  std::map<std::string, std::string> values;
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
    }
    for (const auto& [key, value] : doc.items()) {
      if (value.is_object() || value.is_array()) {
        throw Error(ErrorCode::ParseError, "config: '" + key + "' must be a scalar");
      }
      values[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
    return values;
  }
  std::istringstream in{std::string(text)};
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ParseError, "config line " + std::to_string(n) + ": expected key = value");
    }
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    values[trim(std::string_view(t).substr(0, eq))] = value;
  }
  return values;
}

}  // namespace

// --- JSON views -----------------------------------------------------------------

nlohmann::json to_json(const AnalyzeResponse& r) {
  nlohmann::json out;
  out["distribution"] = distribution_json(r.distribution);
  out["top_emotion"] = std::string(ser::to_string(r.top_emotion));
  out["negative"] = r.negative;
  if (r.notification_text) out["notification_text"] = *r.notification_text;
  out["recommendations"] = nlohmann::json::array();
  for (const auto& item : r.recommendations) {
    out["recommendations"].push_back({{"id", item.id}, {"text", item.text}});
  }
  if (r.audio_ref) out["audio_ref"] = *r.audio_ref;
  if (!r.warnings.empty()) out["warnings"] = r.warnings;
  return out;
}

std::string format_utc_ms(std::int64_t ms) {
  const std::time_t secs = static_cast<std::time_t>(ms >= 0 ? ms / 1000 : (ms - 999) / 1000);
  const auto frac = static_cast<int>(ms - static_cast<std::int64_t>(secs) * 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0')
     << frac << 'Z';
  return os.str();
}

nlohmann::json to_json(const SessionRecord& r) {
  return {{"session_id", r.session_id},
          {"timestamp", format_utc_ms(r.timestamp_ms)},
          {"language", std::string(rec::to_string(r.language))},
          {"input_seconds", r.input_seconds},
          {"top_emotion", std::string(ser::to_string(r.top_emotion))},
          {"probabilities", distribution_json(r.distribution)},
          {"recommendation_ids", r.recommendation_ids}};
}

// --- session log ------------------------------------------------------------------

SessionLog::SessionLog(const std::filesystem::path& path) : path_(path) {
  out_.open(path_, std::ios::app);
  if (!out_) throw Error(ErrorCode::IoError, "cannot open session log " + path_.string());
}

void SessionLog::append(const SessionRecord& record) {
  const std::string line = to_json(record).dump() + "\n";
  std::lock_guard lock(mutex_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) {
    out_.clear();
    throw Error(ErrorCode::IoError, "write to " + path_.string() + " failed");
  }
}

// --- clip store -------------------------------------------------------------------

ClipStore::ClipStore(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw Error(ErrorCode::InvalidConfig, "clip store capacity must be positive");
}

std::string ClipStore::put(std::vector<std::uint8_t> wav) {
  std::lock_guard lock(mutex_);
  std::ostringstream ref;
  ref << "clip-" << std::hex << std::setw(8) << std::setfill('0') << ++next_;
  lru_.emplace_front(ref.str(), std::move(wav));
  index_[lru_.front().first] = lru_.begin();
  while (lru_.size() > capacity_) {
    index_.erase(lru_.back().first);
    lru_.pop_back();
  }
  return ref.str();
}

std::optional<std::vector<std::uint8_t>> ClipStore::get(const std::string& ref) {
  std::lock_guard lock(mutex_);
  const auto it = index_.find(ref);
  if (it == index_.end()) return std::nullopt;
  lru_.splice(lru_.begin(), lru_, it->second);
  return it->second->second;
}

std::size_t ClipStore::size() const {
  std::lock_guard lock(mutex_);
  return lru_.size();
}

// --- configuration ------------------------------------------------------------------

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

ServiceConfig parse_service_config(std::string_view json, const std::filesystem::path& base_dir,
                                   const EnvLookup& env) {
  static const std::vector<std::string> kKeys = {
      "ser_checkpoint", "rec_checkpoint", "corpus",    "embeddings", "templates",
      "tts_backend",    "tts_endpoint",   "tts_timeout", "host",     "port",
      "threshold",      "session_log",    "clip_capacity"};
  std::map<std::string, std::string> values = read_key_values(json);
  for (const auto& [key, value] : values) {
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
      throw Error(ErrorCode::InvalidConfig, "config: unknown key '" + key + "'");
    }
  }
  for (const std::string& key : kKeys) {
    std::string var = "EMPATH_";
    for (char c : key) var.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (auto v = env(var)) values[key] = *v;
  }

  auto path = [&](const std::string& key, bool required) -> std::filesystem::path {
    const auto it = values.find(key);
    if (it == values.end() || it->second.empty()) {
      if (required) throw Error(ErrorCode::InvalidConfig, "config: '" + key + "' is required");
      return {};
    }
    std::filesystem::path p(it->second);
    return p.is_relative() ? base_dir / p : p;
  };
  auto number = [&](const std::string& key, double fallback) {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidConfig, "config: '" + key + "' is not a number");
    }
  };

  ServiceConfig cfg;
  cfg.ser_checkpoint = path("ser_checkpoint", true);
  cfg.rec_checkpoint = path("rec_checkpoint", true);
  cfg.corpus = path("corpus", true);
  cfg.templates = path("templates", true);
  cfg.embeddings = path("embeddings", false);
  cfg.session_log = path("session_log", false);
  if (values.contains("host")) cfg.host = values["host"];
  cfg.port = static_cast<int>(number("port", cfg.port));
  cfg.threshold = number("threshold", cfg.threshold);
  cfg.clip_capacity = static_cast<std::size_t>(number("clip_capacity", 256));
  cfg.tts.timeout_seconds = number("tts_timeout", cfg.tts.timeout_seconds);
  const std::string backend = values.contains("tts_backend") ? values["tts_backend"] : "stub";
  if (backend == "stub") {
    cfg.tts.kind = tts::BackendKind::Stub;
  } else if (backend == "http") {
    cfg.tts.kind = tts::BackendKind::Http;
  } else {
    throw Error(ErrorCode::InvalidConfig, "config: tts_backend must be stub or http");
  }
  if (values.contains("tts_endpoint")) cfg.tts.endpoint = values["tts_endpoint"];
  if (cfg.port < 0 || cfg.port > 65535) throw Error(ErrorCode::InvalidConfig, "config: bad port");
  if (cfg.threshold < 0.0 || cfg.threshold > 1.0) {
    throw Error(ErrorCode::InvalidConfig, "config: threshold must lie in [0, 1]");
  }
  if (cfg.clip_capacity == 0) throw Error(ErrorCode::InvalidConfig, "config: clip_capacity is 0");
  cfg.tts.validate();
  return cfg;
}

ServiceConfig load_service_config(const std::filesystem::path& path, const EnvLookup& env) {
  const auto bytes = nn::read_file_bytes(path);
  return parse_service_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                              path.parent_path(), env);
}

Snapshot load_snapshot(const ServiceConfig& config) {
  Snapshot s;
  s.ser = in_stage("ser", [&] { return ser::SerModel::from_checkpoint(nn::load_checkpoint(config.ser_checkpoint)); });
  s.rec = in_stage("recommend", [&] {
    return rec::RecModel::from_checkpoint(nn::load_checkpoint(config.rec_checkpoint));
  });
  if (!config.embeddings.empty()) {
    in_stage("recommend", [&] {
      const rec::EmbeddingTable table = rec::load_embeddings(config.embeddings);
      if (table.tokens() != s.rec.embeddings().tokens() ||
          !(table.vectors() == s.rec.embeddings().vectors())) {
        throw Error(ErrorCode::InvalidConfig, "embeddings file differs from the table in " +
                                                  config.rec_checkpoint.string());
      }
    });
  }
  s.corpus = in_stage("recommend", [&] { return rec::load_suggestions(config.corpus); });
  s.templates = in_stage("tts", [&] { return tts::load_templates(config.templates); });
  s.tts = in_stage("tts", [&] { return tts::make_backend(config.tts); });
  return s;
}

// --- pipeline ------------------------------------------------------------------------

Pipeline::Pipeline(std::shared_ptr<const Snapshot> snapshot, double threshold,
                   std::shared_ptr<ClipStore> clips, std::shared_ptr<SessionLog> log, Clock clock)
    : snapshot_(std::move(snapshot)),
      extractor_(snapshot_->ser.feature_config()),
      threshold_(threshold),
      clips_(std::move(clips)),
      log_(std::move(log)),
      clock_(clock ? std::move(clock) : Clock(system_clock_ms)) {
  if (!snapshot_->tts) throw Error(ErrorCode::ModelNotLoaded, "no TTS backend");
}

EmotionDistribution Pipeline::classify(std::span<const std::uint8_t> wav) const {
  audio::AudioClip clip;
  try {
    clip = audio::read_wav(wav);
  } catch (const Error& e) {
    throw StageError("decode", Error(ErrorCode::DecodeError, e.what()));
  }
  const dsp::MelSpectrogram features = in_stage("feature", [&] {
    if (clip.sample_rate != extractor_.config().sample_rate) {
      clip = audio::resample_linear(clip, extractor_.config().sample_rate);
    }
    return snapshot_->ser.normalize(extractor_.compute(clip));
  });
  return in_stage("ser", [&] { return snapshot_->ser.forward(features); });
}

AnalyzeResponse Pipeline::respond(const EmotionDistribution& distribution, Language language) {
  AnalyzeResponse r;
  r.distribution = distribution;
  r.top_emotion = distribution.top();
  const std::optional<Emotion> negative = ser::filter_negative(distribution, threshold_);
  r.negative = negative.has_value();
  if (!negative) return r;

  const Snapshot& s = *snapshot_;
  r.notification_text = in_stage("tts", [&] { return s.templates.render(*negative, language); });
  const rec::Recommendation picks =
      in_stage("recommend", [&] { return rec::recommend(s.corpus, s.rec, *negative, language, 3); });
  std::string speech = *r.notification_text;
  for (const auto& item : picks.items) {
    r.recommendations.push_back({item.suggestion->id, item.suggestion->text});
    speech += "; " + item.suggestion->text;
  }
  if (picks.truncated) r.warnings.push_back("fewer than 3 suggestions available");

  try {
    const audio::AudioClip clip = s.tts->synthesize({speech, language, std::nullopt});
    r.audio_ref = clips_->put(audio::write_wav(clip));
  } catch (const Error& e) {
    r.warnings.push_back(std::string("tts: ") + e.what());
  }
  return r;
}

AnalyzeResponse Pipeline::analyze(std::span<const std::uint8_t> wav, Language language,
                                  const std::string& session_id) {
  const EmotionDistribution dist = classify(wav);
  AnalyzeResponse r = respond(dist, language);

  if (log_) {
    SessionRecord rec;
    rec.timestamp_ms = clock_();
    if (session_id.empty()) {
      std::lock_guard lock(id_mutex_);
      std::ostringstream id;
      id << std::hex << rec.timestamp_ms << '-' << ++session_counter_;
      rec.session_id = id.str();
    } else {
      rec.session_id = session_id;
    }
    rec.language = language;
    // Duration from the header-decoded sample count.
    rec.input_seconds = audio::read_wav(wav).duration_seconds();
    rec.top_emotion = r.top_emotion;
    rec.distribution = r.distribution;
    for (const auto& item : r.recommendations) rec.recommendation_ids.push_back(item.id);
    try {
      log_->append(rec);
    } catch (const Error& e) {
      r.warnings.push_back(std::string("session log: ") + e.what());
    }
  }
  return r;
}

// --- HTTP -----------------------------------------------------------------------------

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::DecodeError:
    case ErrorCode::InvalidLanguage:
    case ErrorCode::EmptyClip:
      return 400;
    case ErrorCode::InsufficientCandidates:
      return 422;
    default:
      return 500;
  }
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& stage,
                const std::string& message) {
  nlohmann::json body = {{"error", code}, {"message", message}};
  if (!stage.empty()) body["stage"] = stage;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

Server::Server(std::shared_ptr<Pipeline> pipeline)
    : pipeline_(std::move(pipeline)), http_(std::make_unique<httplib::Server>()) {
  install_routes();
}

Server::~Server() { stop(); }

nlohmann::json Server::health() const {
  const Snapshot& s = pipeline_->snapshot();
  return {{"status", "ok"},
          {"ser", {{"parameters", s.ser.parameter_count()}}},
          {"rec",
           {{"vocabulary", s.rec.embeddings().size()},
            {"dimension", s.rec.embeddings().dim()},
            {"hidden", s.rec.hidden()}}},
          {"corpus",
           {{"size", s.corpus.size()},
            {"en", s.corpus.by_language(Language::En).size()},
            {"fa", s.corpus.by_language(Language::Fa).size()}}},
          {"tts", std::string(s.tts->name())},
          {"clips", pipeline_->clips().size()}};
}

void Server::install_routes() {
  http_->Post("/api/v1/analyze", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string lang_code = req.has_param("lang") ? req.get_param_value("lang") : "en";
    const auto lang = rec::parse_language(lang_code);
    if (!lang) {
      send_error(res, 400, to_string(ErrorCode::InvalidLanguage), "",
                 "lang must be en or fa, got '" + lang_code + "'");
      return;
    }
    const std::string* body = nullptr;
    std::string upload;
    if (req.has_file("audio")) {
      upload = req.get_file_value("audio").content;
      body = &upload;
    } else if (req.get_header_value("Content-Type").starts_with("audio/")) {
      body = &req.body;
    } else {
      send_error(res, 400, to_string(ErrorCode::DecodeError), "decode",
                 "expected multipart field 'audio'");
      return;
    }
    try {
      const auto* data = reinterpret_cast<const std::uint8_t*>(body->data());
      const std::string session = req.has_param("session") ? req.get_param_value("session") : "";
      const AnalyzeResponse r =
          pipeline_->analyze(std::span<const std::uint8_t>(data, body->size()), *lang, session);
      res.set_content(to_json(r).dump(), "application/json");
    } catch (const StageError& e) {
      send_error(res, http_status(e.code()), to_string(e.code()), e.stage(), e.what());
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), to_string(e.code()), "", e.what());
    }
  });

  http_->Get(R"(/api/v1/audio/([A-Za-z0-9_-]+))",
             [this](const httplib::Request& req, httplib::Response& res) {
               const auto clip = pipeline_->clips().get(req.matches[1]);
               if (!clip) {
                 send_error(res, 404, "NotFound", "", "unknown or expired audio_ref");
                 return;
               }
               res.set_content(std::string(clip->begin(), clip->end()), "audio/wav");
             });

  http_->Get("/api/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(health().dump(), "application/json");
  });

  // The session client is served from another origin during development.
  http_->set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  http_->Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

int Server::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = http_->bind_to_any_port(host);
  } else if (!http_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  return bound;
}

void Server::run(const std::string& host, int port) {
  if (!http_->listen(host, port)) {
    throw Error(ErrorCode::IoError, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void Server::stop() {
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace empath::service
