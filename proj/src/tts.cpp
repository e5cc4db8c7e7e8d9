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

#include "empath/tts.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "empath/error.hpp"

namespace empath::tts {

void TtsBackendConfig::validate() const {
  if (!(timeout_seconds > 0.0)) throw Error(ErrorCode::InvalidConfig, "tts timeout must be positive");
  if (kind == BackendKind::Http) {
    if (endpoint.rfind("http://", 0) != 0 || endpoint.size() <= 7) {
      throw Error(ErrorCode::InvalidConfig, "tts endpoint must be an http:// URL, got '" + endpoint + "'");
    }
  }
}

audio::AudioClip StubBackend::synthesize(const TtsRequest& request) const {
  if (request.text.empty()) throw Error(ErrorCode::InvalidConfig, "empty synthesis text");
  audio::AudioClip clip;
  clip.sample_rate = kSampleRate;
  clip.samples.resize(request.text.size() * kSamplesPerByte);
  std::size_t pos = 0;
  for (char c : request.text) {
    const double w = 2.0 * std::numbers::pi * tone_hz(static_cast<unsigned char>(c)) / kSampleRate;
    for (std::size_t n = 0; n < kSamplesPerByte; ++n) {
      clip.samples[pos++] = kAmplitude * std::sin(w * static_cast<double>(n));
    }
  }
  return clip;
}

HttpBackend::HttpBackend(TtsBackendConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t slash = config_.endpoint.find('/', 7);
  origin_ = config_.endpoint.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : config_.endpoint.substr(slash);
}

audio::AudioClip HttpBackend::synthesize(const TtsRequest& request) const {
  if (request.text.empty()) throw Error(ErrorCode::InvalidConfig, "empty synthesis text");
  nlohmann::json body = {{"text", request.text},
                         {"language", std::string(rec::to_string(request.language))},
                         {"voice", request.voice ? nlohmann::json(*request.voice) : nlohmann::json()}};

  httplib::Client client(origin_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(config_.timeout_seconds));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const auto start = std::chrono::steady_clock::now();
  const auto res = client.Post(path_, body.dump(), "application/json");
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!res) {
    const httplib::Error err = res.error();
    if (err == httplib::Error::ConnectionTimeout ||
        ((err == httplib::Error::Read || err == httplib::Error::Write) &&
         elapsed >= 0.9 * config_.timeout_seconds)) {
      throw Error(ErrorCode::Timeout, "no reply from " + origin_ + " within " +
                                          std::to_string(config_.timeout_seconds) + " s");
    }
    throw Error(ErrorCode::BackendUnreachable, origin_ + ": " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::BackendError, "HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  const auto* data = reinterpret_cast<const std::uint8_t*>(res->body.data());
  try {
    return audio::read_wav(std::span<const std::uint8_t>(data, res->body.size()));
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedResponse, e.what());
  }
}

std::unique_ptr<TtsBackend> make_backend(const TtsBackendConfig& config) {
  config.validate();
  if (config.kind == BackendKind::Http) return std::make_unique<HttpBackend>(config);
  return std::make_unique<StubBackend>();
}

audio::AudioClip synthesize(const TtsRequest& request, const TtsBackendConfig& config) {
  return make_backend(config)->synthesize(request);
}

// --- notification templates ---------------------------------------------------

NotificationTemplates::NotificationTemplates(std::map<Language, Entry> entries)
    : entries_(std::move(entries)) {
  for (Language lang : {Language::En, Language::Fa}) {
    if (!entries_.contains(lang)) {
      throw Error(ErrorCode::InvalidConfig,
                  "notification templates lack language '" + std::string(rec::to_string(lang)) + "'");
    }
  }
}

std::string NotificationTemplates::render(ser::Emotion emotion, Language language) const {
  std::size_t cls = rec::kNumClasses;
  for (std::size_t c = 0; c < rec::kNumClasses; ++c) {
    if (rec::kNegativeEmotions[c] == emotion) cls = c;
  }
  if (cls == rec::kNumClasses) {
    throw Error(ErrorCode::InvalidEmotion,
                std::string(ser::to_string(emotion)) + " has no notification");
  }
  const Entry& entry = entries_.at(language);
  std::string out = entry.text;
  static constexpr std::string_view kSlot = "{emotion}";
  for (std::size_t pos = out.find(kSlot); pos != std::string::npos;
       pos = out.find(kSlot, pos + entry.emotion_names[cls].size())) {
    out.replace(pos, kSlot.size(), entry.emotion_names[cls]);
  }
  return out;
}

NotificationTemplates parse_templates(std::string_view json) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("templates: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, "templates: expected an object");
  std::map<Language, NotificationTemplates::Entry> entries;
  for (const auto& [code, value] : doc.items()) {
    const auto lang = rec::parse_language(code);
    if (!lang) throw Error(ErrorCode::InvalidLanguage, "templates: '" + code + "'");
    try {
      NotificationTemplates::Entry entry;
      entry.text = value.at("template").get<std::string>();
      for (std::size_t c = 0; c < rec::kNumClasses; ++c) {
        const std::string key(ser::to_string(rec::kNegativeEmotions[c]));
        entry.emotion_names[c] = value.at("emotions").at(key).get<std::string>();
      }
      entries.emplace(*lang, std::move(entry));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, "templates[" + code + "]: " + e.what());
    }
  }
  return NotificationTemplates(std::move(entries));
}

NotificationTemplates load_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_templates(buf.str());
}

}  // namespace empath::tts
