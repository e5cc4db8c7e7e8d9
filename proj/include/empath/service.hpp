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

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "empath/error.hpp"
#include "empath/recommender.hpp"
#include "empath/ser_model.hpp"
#include "empath/tts.hpp"

namespace httplib {
class Server;
}

namespace empath::service {

using rec::Language;
using ser::Emotion;
using ser::EmotionDistribution;

// Failure inside analyze, tagged with the stage that raised it:
// decode, feature, ser, recommend or tts.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), stage + ": " + cause.what()), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct RecommendationItem {
  std::string id;
  std::string text;
};

struct AnalyzeResponse {
  EmotionDistribution distribution;
  Emotion top_emotion = Emotion::Neutrality;
  bool negative = false;
  std::optional<std::string> notification_text;
  std::vector<RecommendationItem> recommendations;
  std::optional<std::string> audio_ref;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const AnalyzeResponse& response);

struct SessionRecord {
  std::string session_id;
  std::int64_t timestamp_ms = 0;
  Language language = Language::En;
  double input_seconds = 0.0;
  Emotion top_emotion = Emotion::Neutrality;
  EmotionDistribution distribution;
  std::vector<std::string> recommendation_ids;
};

nlohmann::json to_json(const SessionRecord& record);

// Formats milliseconds since the epoch as 2024-01-02T03:04:05.678Z.
std::string format_utc_ms(std::int64_t ms);

// Append-only JSONL writer. Each record is written as one line and flushed
// under a mutex, so concurrent writers never interleave.
class SessionLog {
 public:
  // Opens in append mode. Throws IoError.
  explicit SessionLog(const std::filesystem::path& path);

  // Throws IoError.
  void append(const SessionRecord& record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
  std::ofstream out_;
};

// Bounded in-memory store of encoded WAV clips with LRU eviction.
class ClipStore {
 public:
  static constexpr std::size_t kDefaultCapacity = 256;

  explicit ClipStore(std::size_t capacity = kDefaultCapacity);

  std::string put(std::vector<std::uint8_t> wav);
  std::optional<std::vector<std::uint8_t>> get(const std::string& ref);
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }

 private:
  using Entry = std::pair<std::string, std::vector<std::uint8_t>>;

  std::size_t capacity_;
  std::uint64_t next_ = 0;
  mutable std::mutex mutex_;
  std::list<Entry> lru_;  // most recent first
  std::unordered_map<std::string, std::list<Entry>::iterator> index_;
};

struct ServiceConfig {
  std::filesystem::path ser_checkpoint;
  std::filesystem::path rec_checkpoint;
  std::filesystem::path corpus;
  std::filesystem::path embeddings;  // optional; must agree with the checkpoint
  std::filesystem::path templates;
  tts::TtsBackendConfig tts;
  std::string host = "127.0.0.1";
  int port = 8080;
  double threshold = 0.0;
  std::filesystem::path session_log;  // empty disables logging
  std::size_t clip_capacity = ClipStore::kDefaultCapacity;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

std::optional<std::string> process_env(const std::string& name);

// JSON object or `key = value` lines whose keys match the EMPATH_* variables in lower case:
// ser_checkpoint, rec_checkpoint, corpus, embeddings, templates, tts_backend,
// tts_endpoint, tts_timeout, host, port, threshold, session_log,
// clip_capacity. Environment variables win over file values; relative paths
// are resolved against the config file's directory. Throws InvalidConfig,
// ParseError or IoError.
ServiceConfig parse_service_config(std::string_view json, const std::filesystem::path& base_dir,
                                   const EnvLookup& env = process_env);
ServiceConfig load_service_config(const std::filesystem::path& path,
                                  const EnvLookup& env = process_env);

// Frozen models and data shared by every request.
struct Snapshot {
  ser::SerModel ser;
  rec::RecModel rec;
  rec::SuggestionCorpus corpus;
  tts::NotificationTemplates templates;
  std::unique_ptr<tts::TtsBackend> tts;
};

// Loads everything named by the config. Failures are rethrown as StageError
// with the stage naming the resource.
Snapshot load_snapshot(const ServiceConfig& config);

class Pipeline {
 public:
  using Clock = std::function<std::int64_t()>;

  Pipeline(std::shared_ptr<const Snapshot> snapshot, double threshold,
           std::shared_ptr<ClipStore> clips, std::shared_ptr<SessionLog> log = nullptr,
           Clock clock = {});

  // Full turn: decode, features, SER, filter, recommend, speak, log.
  // Throws StageError; nothing is logged when it throws.
  AnalyzeResponse analyze(std::span<const std::uint8_t> wav, Language language,
                          const std::string& session_id = {});

  // Filter, recommend and speak for an already computed distribution.
  AnalyzeResponse respond(const EmotionDistribution& distribution, Language language);

  EmotionDistribution classify(std::span<const std::uint8_t> wav) const;

  const Snapshot& snapshot() const { return *snapshot_; }
  ClipStore& clips() { return *clips_; }

 private:
  std::shared_ptr<const Snapshot> snapshot_;
  dsp::LogMelExtractor extractor_;
  double threshold_;
  std::shared_ptr<ClipStore> clips_;
  std::shared_ptr<SessionLog> log_;
  Clock clock_;
  std::mutex id_mutex_;
  std::uint64_t session_counter_ = 0;
};

// HTTP front end:
//   POST /api/v1/analyze   multipart field "audio", query lang=en|fa
//   GET  /api/v1/audio/{ref}
//   GET  /api/v1/health
class Server {
 public:
  explicit Server(std::shared_ptr<Pipeline> pipeline);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port. Throws IoError.
  int start(const std::string& host, int port);
  // Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

  nlohmann::json health() const;

 private:
  void install_routes();

  std::shared_ptr<Pipeline> pipeline_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
};

}  // namespace empath::service
