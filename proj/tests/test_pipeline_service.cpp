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

#include <doctest.h>

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "empath/audio_io.hpp"
#include "empath/error.hpp"
#include "empath/nn/checkpoint.hpp"
#include "empath/nn/rng.hpp"
#include "empath/service.hpp"

using namespace empath;
using namespace empath::service;

namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

const fs::path kData = EMPATH_DATA_DIR;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

class FailingTts final : public tts::TtsBackend {
 public:
  audio::AudioClip synthesize(const tts::TtsRequest&) const override {
    throw Error(ErrorCode::BackendUnreachable, "speaker unplugged");
  }
  std::string_view name() const override { return "failing"; }
};

const rec::RecModel& trained_rec() {
  static const rec::RecModel model = [] {
    auto table = std::make_shared<const rec::EmbeddingTable>(
        rec::load_embeddings(kData / "embeddings_synthetic.txt"));
    rec::RecModel m = rec::build_rec_model(table, 0);
    TrainConfig tc;
    tc.epochs = 50;
    tc.learning_rate = 3e-3;
    rec::train_rec(m, rec::load_suggestions(kData / "seed_corpus.jsonl"), tc);
    return m;
  }();
  return model;
}

// SER model whose output ignores the audio: zero dense weights and a bias
// favouring `forced`.
ser::SerModel forced_ser(Emotion forced) {
  ser::SerModel m = ser::build_ser_model(0);
  dsp::FeatureStats stats{std::vector<double>(64, -10.0), std::vector<double>(64, 5.0)};
  m.set_feature_stats(stats);
  m.dense_weights().value.fill(0.0);
  m.dense_bias().value.fill(0.0);
  m.dense_bias().value.values[ser::index_of(forced)] = 4.0;
  return m;
}

std::shared_ptr<const Snapshot> make_snapshot(Emotion forced,
                                              std::unique_ptr<tts::TtsBackend> backend = nullptr) {
  auto s = std::make_shared<Snapshot>();
  s->ser = forced_ser(forced);
  s->rec = trained_rec();
  s->corpus = rec::load_suggestions(kData / "seed_corpus.jsonl");
  s->templates = tts::load_templates(kData / "templates.json");
  s->tts = backend ? std::move(backend) : std::make_unique<tts::StubBackend>();
  return s;
}

std::vector<std::uint8_t> noise_wav(int sample_rate = 16000, double seconds = 1.0) {
  nn::Rng rng(77);
  audio::AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.resize(static_cast<std::size_t>(seconds * sample_rate));
  for (double& s : clip.samples) s = rng.uniform(-0.3, 0.3);
  return audio::write_wav(clip);
}

Pipeline::Clock fixed_clock() {
  return [] { return std::int64_t{1700000000123}; };
}

}  // namespace

TEST_CASE("config in JSON and key = value form") {
  const auto no_env = [](const std::string&) { return std::optional<std::string>{}; };
  const std::string json = R"({"ser_checkpoint": "models/ser.empc", "rec_checkpoint": "/abs/rec.empc",
      "corpus": "c.jsonl", "templates": "t.json", "port": 9001, "threshold": 0.4,
      "tts_backend": "http", "tts_endpoint": "http://127.0.0.1:5002/api/tts", "tts_timeout": 2.5})";
  const auto a = parse_service_config(json, "/etc/empath", no_env);
  CHECK(a.ser_checkpoint == fs::path("/etc/empath/models/ser.empc"));
  CHECK(a.rec_checkpoint == fs::path("/abs/rec.empc"));
  CHECK(a.port == 9001);
  CHECK(a.threshold == 0.4);
  CHECK(a.tts.kind == tts::BackendKind::Http);
  CHECK(a.tts.timeout_seconds == 2.5);
  CHECK(a.session_log.empty());
  CHECK(a.embeddings.empty());
  CHECK(a.clip_capacity == 256);
  CHECK(a.host == "127.0.0.1");

  const std::string toml =
      "# service\n"
      "ser_checkpoint = \"ser.empc\"\n"
      "rec_checkpoint = rec.empc\n"
      "corpus = c.jsonl\n"
      "templates = t.json\n"
      "\n"
      "session_log = logs/sessions.jsonl\n"
      "host = 0.0.0.0\n";
  const std::map<std::string, std::string> env = {{"EMPATH_PORT", "7000"},
                                                   {"EMPATH_CORPUS", "/data/other.jsonl"},
                                                   {"EMPATH_CLIP_CAPACITY", "4"}};
  const auto b = parse_service_config(toml, "base", [&](const std::string& k) -> std::optional<std::string> {
    const auto it = env.find(k);
    if (it == env.end()) return std::nullopt;
    return it->second;
  });
  CHECK(b.ser_checkpoint == fs::path("base/ser.empc"));
  CHECK(b.corpus == fs::path("/data/other.jsonl"));
  CHECK(b.port == 7000);
  CHECK(b.clip_capacity == 4);
  CHECK(b.host == "0.0.0.0");
  CHECK(b.session_log == fs::path("base/logs/sessions.jsonl"));
  CHECK(b.tts.kind == tts::BackendKind::Stub);

  SUBCASE("errors") {
    const std::string base = "ser_checkpoint = a\nrec_checkpoint = b\ncorpus = c\ntemplates = d\n";
    CHECK(code_of([&] { parse_service_config(base + "colour = red\n", ".", no_env); }) ==
          ErrorCode::InvalidConfig);
    CHECK(code_of([&] { parse_service_config(base + "port = 70000\n", ".", no_env); }) ==
          ErrorCode::InvalidConfig);
    CHECK(code_of([&] { parse_service_config(base + "port = eighty\n", ".", no_env); }) ==
          ErrorCode::InvalidConfig);
    CHECK(code_of([&] { parse_service_config(base + "threshold = 1.5\n", ".", no_env); }) ==
          ErrorCode::InvalidConfig);
    CHECK(code_of([&] { parse_service_config(base + "tts_backend = http\n", ".", no_env); }) ==
          ErrorCode::InvalidConfig);
    CHECK(code_of([&] { parse_service_config(base + "just words\n", ".", no_env); }) ==
          ErrorCode::ParseError);
    CHECK(code_of([&] { parse_service_config("corpus = c\n", ".", no_env); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([&] { parse_service_config("{\"corpus\": ", ".", no_env); }) == ErrorCode::ParseError);
    CHECK(code_of([&] { load_service_config("/nonexistent/empath.toml", no_env); }) == ErrorCode::IoError);
  }
}

TEST_CASE("load_snapshot fails fast with a stage") {
  TempDir dir("empath_snapshot_test");
  nn::save_checkpoint(dir.path / "ser.empc", forced_ser(Emotion::Anger).to_checkpoint());
  nn::save_checkpoint(dir.path / "rec.empc", trained_rec().to_checkpoint());
  ServiceConfig cfg;
  cfg.ser_checkpoint = dir.path / "ser.empc";
  cfg.rec_checkpoint = dir.path / "rec.empc";
  cfg.corpus = kData / "seed_corpus.jsonl";
  cfg.templates = kData / "templates.json";
  cfg.embeddings = kData / "embeddings_synthetic.txt";
  const Snapshot s = load_snapshot(cfg);
  CHECK(s.corpus.size() == 60);
  CHECK(s.tts->name() == "stub");

  auto stage_of = [](const ServiceConfig& c) -> std::string {
    try {
      load_snapshot(c);
    } catch (const StageError& e) {
      return e.stage();
    }
    return "none";
  };
  ServiceConfig bad = cfg;
  bad.ser_checkpoint = dir.path / "missing.empc";
  CHECK(stage_of(bad) == "ser");
  bad = cfg;
  bad.rec_checkpoint = dir.path / "ser.empc";
  CHECK(stage_of(bad) == "recommend");
  bad = cfg;
  bad.embeddings = dir.path / "other.txt";
  std::ofstream(bad.embeddings) << "calm 1 2 3\n";
  CHECK(stage_of(bad) == "recommend");
  bad = cfg;
  bad.templates = dir.path / "missing.json";
  CHECK(stage_of(bad) == "tts");
}

TEST_CASE("clip store evicts least recently used") {
  ClipStore store(2);
  const auto a = store.put({1});
  const auto b = store.put({2});
  CHECK(a != b);
  CHECK(store.get(a) == std::vector<std::uint8_t>{1});
  const auto c = store.put({3});
  CHECK(store.size() == 2);
  CHECK_FALSE(store.get(b).has_value());
  CHECK(store.get(a).has_value());
  CHECK(store.get(c).has_value());
  CHECK_FALSE(store.get("clip-ffffffff").has_value());
  CHECK(code_of([] { ClipStore(0); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("session log appends whole lines") {
  TempDir dir("empath_session_log_test");
  const fs::path path = dir.path / "sessions.jsonl";
  SessionRecord rec;
  rec.session_id = "s1";
  rec.timestamp_ms = 1700000000123;
  rec.recommendation_ids = {"en-anger-01"};
  {
    SessionLog log(path);
    log.append(rec);
  }
  {
    SessionLog log(path);  // reopening keeps earlier lines
    rec.session_id = "s2";
    log.append(rec);
  }
  auto lines = read_lines(path);
  REQUIRE(lines.size() == 2);
  const auto first = nlohmann::json::parse(lines[0]);
  CHECK(first["session_id"] == "s1");
  CHECK(first["timestamp"] == "2023-11-14T22:13:20.123Z");
  CHECK(first["recommendation_ids"][0] == "en-anger-01");
  CHECK(nlohmann::json::parse(lines[1])["session_id"] == "s2");

  SUBCASE("concurrent writers") {
    SessionLog log(path);
    constexpr int kThreads = 8;
    constexpr int kPerThread = 150;
    std::vector<std::thread> workers;
    for (int t = 0; t < kThreads; ++t) {
      workers.emplace_back([&, t] {
        SessionRecord r;
        r.recommendation_ids.assign(20, std::string(40, static_cast<char>('a' + t)));
        for (int i = 0; i < kPerThread; ++i) {
          r.session_id = std::to_string(t) + "-" + std::to_string(i);
          log.append(r);
        }
      });
    }
    for (auto& w : workers) w.join();
    lines = read_lines(path);
    CHECK(lines.size() == 2 + kThreads * kPerThread);
    std::set<std::string> ids;
    for (std::size_t i = 2; i < lines.size(); ++i) {
      const auto j = nlohmann::json::parse(lines[i]);
      ids.insert(j["session_id"].get<std::string>());
      const std::string tag = j["recommendation_ids"][0];
      CHECK(tag[0] == 'a' + std::stoi(j["session_id"].get<std::string>()));
    }
    CHECK(ids.size() == kThreads * kPerThread);
  }
  CHECK(code_of([&] { SessionLog(dir.path / "no" / "such" / "dir.jsonl"); }) == ErrorCode::IoError);
  CHECK(format_utc_ms(0) == "1970-01-01T00:00:00.000Z");
}

TEST_CASE("pipeline analyze") {
  TempDir dir("empath_pipeline_test");
  auto log = std::make_shared<SessionLog>(dir.path / "s.jsonl");
  auto clips = std::make_shared<ClipStore>();

  SUBCASE("anger yields Table I suggestions and a clip") {
    Pipeline p(make_snapshot(Emotion::Anger), 0.0, clips, log, fixed_clock());
    const auto r = p.analyze(noise_wav(), Language::En);
    CHECK(r.negative);
    CHECK(r.top_emotion == Emotion::Anger);
    REQUIRE(r.recommendations.size() == 3);
    std::set<std::string> ids;
    for (const auto& item : r.recommendations) ids.insert(item.id);
    CHECK(ids == std::set<std::string>{"en-anger-01", "en-anger-02", "en-anger-03"});
    CHECK(r.notification_text ==
          "It sounds like you may be feeling anger. Here are some things that might help.");
    REQUIRE(r.audio_ref.has_value());
    const auto wav = clips->get(*r.audio_ref);
    REQUIRE(wav.has_value());
    std::size_t bytes = r.notification_text->size();
    for (const auto& item : r.recommendations) bytes += 2 + item.text.size();
    CHECK(audio::read_wav(*wav).samples.size() == 800 * bytes);
    CHECK(r.warnings.empty());

    const auto lines = read_lines(log->path());
    REQUIRE(lines.size() == 1);
    const auto j = nlohmann::json::parse(lines[0]);
    CHECK(j["top_emotion"] == "anger");
    CHECK(j["language"] == "en");
    CHECK(j["input_seconds"] == doctest::Approx(1.0));
    CHECK(j["recommendation_ids"].size() == 3);

    const auto again = p.analyze(noise_wav(), Language::En);
    auto ja = to_json(r);
    auto jb = to_json(again);
    ja.erase("audio_ref");
    jb.erase("audio_ref");
    CHECK(ja == jb);
    CHECK(read_lines(log->path()).size() == 2);
  }
  SUBCASE("resampled Persian request") {
    Pipeline p(make_snapshot(Emotion::Sadness), 0.0, clips, log, fixed_clock());
    const auto r = p.analyze(noise_wav(8000, 0.5), Language::Fa, "abc");
    CHECK(r.negative);
    for (const auto& item : r.recommendations) CHECK(item.id.starts_with("fa-"));
    CHECK(r.notification_text->find("غم") != std::string::npos);
    CHECK(nlohmann::json::parse(read_lines(log->path())[0])["session_id"] == "abc");
  }
  SUBCASE("happiness stops after classification") {
    Pipeline p(make_snapshot(Emotion::Happiness), 0.0, clips, log, fixed_clock());
    const auto r = p.analyze(noise_wav(), Language::En);
    CHECK_FALSE(r.negative);
    CHECK(r.recommendations.empty());
    CHECK_FALSE(r.audio_ref.has_value());
    CHECK_FALSE(r.notification_text.has_value());
    const auto j = to_json(r);
    CHECK(j["top_emotion"] == "happiness");
    CHECK_FALSE(j.contains("audio_ref"));
    CHECK(read_lines(log->path()).size() == 1);
  }
  SUBCASE("threshold suppresses weak negatives") {
    Pipeline p(make_snapshot(Emotion::Fear), 0.95, clips, log, fixed_clock());
    const auto r = p.analyze(noise_wav(), Language::En);
    CHECK(r.top_emotion == Emotion::Fear);
    CHECK_FALSE(r.negative);
  }
  SUBCASE("malformed audio is a decode error and is not logged") {
    Pipeline p(make_snapshot(Emotion::Anger), 0.0, clips, log, fixed_clock());
    const std::vector<std::uint8_t> junk = {'R', 'I', 'F', 'F', 0, 0};
    try {
      p.analyze(junk, Language::En);
      FAIL("expected DecodeError");
    } catch (const StageError& e) {
      CHECK(e.code() == ErrorCode::DecodeError);
      CHECK(e.stage() == "decode");
    }
    CHECK(read_lines(log->path()).empty());
  }
  SUBCASE("TTS failure degrades to a warning") {
    Pipeline p(make_snapshot(Emotion::Anger, std::make_unique<FailingTts>()), 0.0, clips, log,
               fixed_clock());
    const auto r = p.analyze(noise_wav(), Language::En);
    CHECK(r.negative);
    CHECK(r.recommendations.size() == 3);
    CHECK_FALSE(r.audio_ref.has_value());
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("speaker unplugged") != std::string::npos);
    CHECK(read_lines(log->path()).size() == 1);
  }
}

TEST_CASE("respond on a given distribution") {
  Pipeline p(make_snapshot(Emotion::Anger), 0.0, std::make_shared<ClipStore>());
  EmotionDistribution d;
  d.probabilities = {0.05, 0.05, 0.6, 0.1, 0.1, 0.1};
  const auto r = p.respond(d, Language::En);
  CHECK(r.negative);
  CHECK(r.top_emotion == Emotion::Sadness);
  std::set<std::string> ids;
  for (const auto& item : r.recommendations) ids.insert(item.id);
  CHECK(ids == std::set<std::string>{"en-sadness-01", "en-sadness-02", "en-sadness-03"});
}

TEST_CASE("http endpoints") {
  TempDir dir("empath_server_test");
  auto log = std::make_shared<SessionLog>(dir.path / "s.jsonl");
  auto pipeline = std::make_shared<Pipeline>(make_snapshot(Emotion::Fear), 0.0,
                                             std::make_shared<ClipStore>(), log);
  Server server(pipeline);
  const int port = server.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(std::chrono::seconds(30));

  SUBCASE("health") {
    const auto res = client.Get("/api/v1/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto j = nlohmann::json::parse(res->body);
    CHECK(j["status"] == "ok");
    CHECK(j["ser"]["parameters"] == 23686);
    CHECK(j["corpus"]["size"] == 60);
    CHECK(j["tts"] == "stub");
    CHECK(j == server.health());
  }
  SUBCASE("analyze then fetch audio") {
    const auto wav = noise_wav();
    httplib::MultipartFormDataItems items = {
        {"audio", std::string(wav.begin(), wav.end()), "clip.wav", "audio/wav"}};
    const auto res = client.Post("/api/v1/analyze?lang=en", items);
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto j = nlohmann::json::parse(res->body);
    CHECK(j["negative"] == true);
    CHECK(j["top_emotion"] == "fear");
    CHECK(j["recommendations"].size() == 3);
    CHECK(j["distribution"].size() == 6);
    const std::string ref = j["audio_ref"];
    const auto audio_res = client.Get("/api/v1/audio/" + ref);
    REQUIRE(audio_res);
    CHECK(audio_res->status == 200);
    CHECK(audio_res->get_header_value("Content-Type") == "audio/wav");
    CHECK(audio::read_wav(std::span(reinterpret_cast<const std::uint8_t*>(audio_res->body.data()),
                                    audio_res->body.size()))
              .samples.size() > 0);
    CHECK(read_lines(log->path()).size() == 1);

    // Raw body upload works too.
    const auto raw = client.Post("/api/v1/analyze", std::string(wav.begin(), wav.end()), "audio/wav");
    REQUIRE(raw);
    CHECK(raw->status == 200);
    CHECK(read_lines(log->path()).size() == 2);
  }
  SUBCASE("errors") {
    const auto missing = client.Get("/api/v1/audio/clip-deadbeef");
    REQUIRE(missing);
    CHECK(missing->status == 404);

    httplib::MultipartFormDataItems junk = {{"audio", "not a wav", "clip.wav", "audio/wav"}};
    const auto bad = client.Post("/api/v1/analyze", junk);
    REQUIRE(bad);
    CHECK(bad->status == 400);
    const auto j = nlohmann::json::parse(bad->body);
    CHECK(j["error"] == "DecodeError");
    CHECK(j["stage"] == "decode");

    const auto wav = noise_wav();
    httplib::MultipartFormDataItems items = {
        {"audio", std::string(wav.begin(), wav.end()), "clip.wav", "audio/wav"}};
    const auto lang = client.Post("/api/v1/analyze?lang=de", items);
    REQUIRE(lang);
    CHECK(lang->status == 400);
    CHECK(nlohmann::json::parse(lang->body)["error"] == "InvalidLanguage");

    httplib::MultipartFormDataItems wrong_field = {{"file", "x", "clip.wav", "audio/wav"}};
    const auto field = client.Post("/api/v1/analyze", wrong_field);
    REQUIRE(field);
    CHECK(field->status == 400);
    CHECK(read_lines(log->path()).empty());
  }
  server.stop();
}
