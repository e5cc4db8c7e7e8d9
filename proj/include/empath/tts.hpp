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

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "empath/audio_io.hpp"
#include "empath/recommender.hpp"

namespace empath::tts {

using rec::Language;

struct TtsRequest {
  std::string text;
  Language language = Language::En;
  std::optional<std::string> voice;
};

enum class BackendKind { Stub, Http };

struct TtsBackendConfig {
  BackendKind kind = BackendKind::Stub;
  std::string endpoint;  // http://host[:port]/path
  double timeout_seconds = 10.0;

  // Throws InvalidConfig.
  void validate() const;
};

class TtsBackend {
 public:
  virtual ~TtsBackend() = default;
  // Throws InvalidConfig for empty text, plus the backend-specific errors.
  virtual audio::AudioClip synthesize(const TtsRequest& request) const = 0;
  virtual std::string_view name() const = 0;
};

// Stub output: 800 samples (50 ms at 16 kHz) per UTF-8 byte, a sine at
// 200 + 4 * byte Hz with amplitude 0.5.
class StubBackend final : public TtsBackend {
 public:
  static constexpr int kSampleRate = 16000;
  static constexpr std::size_t kSamplesPerByte = 800;
  static constexpr double kAmplitude = 0.5;

  audio::AudioClip synthesize(const TtsRequest& request) const override;
  std::string_view name() const override { return "stub"; }

  static double tone_hz(unsigned char byte) { return 200.0 + 4.0 * byte; }
};

// POSTs {"text", "language", "voice"} as JSON and decodes the audio/wav reply.
// Throws BackendUnreachable, BackendError, Timeout or MalformedResponse.
class HttpBackend final : public TtsBackend {
 public:
  explicit HttpBackend(TtsBackendConfig config);

  audio::AudioClip synthesize(const TtsRequest& request) const override;
  std::string_view name() const override { return "http"; }

 private:
  TtsBackendConfig config_;
  std::string origin_;
  std::string path_;
};

std::unique_ptr<TtsBackend> make_backend(const TtsBackendConfig& config);

audio::AudioClip synthesize(const TtsRequest& request, const TtsBackendConfig& config);

// Per-language notification text with an {emotion} placeholder and the
// translated names of the negative emotions.
class NotificationTemplates {
 public:
  struct Entry {
    std::string text;
    std::array<std::string, rec::kNumClasses> emotion_names;
  };

  NotificationTemplates() = default;
  explicit NotificationTemplates(std::map<Language, Entry> entries);

  // Throws InvalidEmotion for a non-negative emotion.
  std::string render(ser::Emotion emotion, Language language) const;

 private:
  std::map<Language, Entry> entries_;
};

// JSON object: language code -> {"template": ..., "emotions": {"anger": ...,
// "fear": ..., "sadness": ...}}. Every supported language must be present.
// Throws ParseError, InvalidLanguage or InvalidConfig.
NotificationTemplates parse_templates(std::string_view json);
NotificationTemplates load_templates(const std::filesystem::path& path);

}  // namespace empath::tts
