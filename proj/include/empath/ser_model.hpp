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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "empath/audio_io.hpp"
#include "empath/dsp_features.hpp"
#include "empath/nn/checkpoint.hpp"
#include "empath/nn/layers.hpp"
#include "empath/nn/tensor.hpp"
#include "empath/training.hpp"

namespace empath::ser {

enum class Emotion : std::uint8_t {
  Anger = 0,
  Fear = 1,
  Sadness = 2,
  Happiness = 3,
  Surprise = 4,
  Neutrality = 5,
};

inline constexpr std::size_t kNumEmotions = 6;
inline constexpr std::array<Emotion, kNumEmotions> kAllEmotions = {
    Emotion::Anger,     Emotion::Fear,     Emotion::Sadness,
    Emotion::Happiness, Emotion::Surprise, Emotion::Neutrality};

std::string_view to_string(Emotion e);
std::optional<Emotion> parse_emotion(std::string_view name);
constexpr std::size_t index_of(Emotion e) { return static_cast<std::size_t>(e); }
constexpr bool is_negative(Emotion e) {
  return e == Emotion::Anger || e == Emotion::Fear || e == Emotion::Sadness;
}

struct EmotionDistribution {
  std::array<double, kNumEmotions> probabilities{};

  Emotion top() const;
  double probability(Emotion e) const { return probabilities[index_of(e)]; }
};

// Returns the top class when it is anger, fear or sadness and its
// probability reaches `threshold`; otherwise nothing.
std::optional<Emotion> filter_negative(const EmotionDistribution& dist, double threshold = 0.0);

struct Example {
  dsp::MelSpectrogram features;  // normalized
  Emotion label = Emotion::Neutrality;
};

enum class Split { Train, Validation };

struct SerDataset {
  std::vector<Example> examples;
  Split split = Split::Train;
};

// Three conv(3x3) + ReLU + 2x2 max-pool stages (1->16->32->64 channels),
// global average pool, dense 64->6. Odd spatial dims are cropped before
// pooling, so a 300x64 input leaves a 37x8 grid.
class SerModel {
 public:
  static constexpr std::array<std::size_t, 4> kChannels = {1, 16, 32, 64};

  SerModel() = default;

  const dsp::FeatureConfig& feature_config() const { return feature_config_; }
  const dsp::FeatureStats& feature_stats() const { return stats_; }
  void set_feature_stats(dsp::FeatureStats stats) { stats_ = std::move(stats); }

  nn::ParameterRefs parameters();
  std::size_t parameter_count() const;

  std::array<double, kNumEmotions> logits(const dsp::MelSpectrogram& features) const;
  EmotionDistribution forward(const dsp::MelSpectrogram& features) const;

  // Adds scale * d(loss)/d(params) into the parameter grads; returns the loss.
  double accumulate_gradients(const dsp::MelSpectrogram& features, Emotion label, double scale,
                              Emotion* predicted = nullptr);

  // Hash of the ReLU masks and pooling argmaxes for this input.
  std::uint64_t branch_signature(const dsp::MelSpectrogram& features) const;
  // Logits and branch signature from a single forward pass.
  std::array<double, kNumEmotions> logits(const dsp::MelSpectrogram& features,
                                          std::uint64_t& signature) const;

  nn::Checkpoint to_checkpoint() const;
  static SerModel from_checkpoint(const nn::Checkpoint& ckpt);

  // Normalizes raw log-mel features with the stored statistics.
  dsp::MelSpectrogram normalize(const dsp::MelSpectrogram& raw) const;

  nn::Parameter& dense_weights() { return dense_w_; }
  nn::Parameter& dense_bias() { return dense_b_; }

 private:
  friend SerModel build_ser_model(std::uint64_t seed, const dsp::FeatureConfig& config);

  struct StageCache {
    nn::Tensor input;
    nn::Tensor activated;
    std::vector<std::size_t> pool_input_shape;
    std::vector<std::size_t> argmax;
  };
  struct ForwardCache {
    std::array<StageCache, 3> stages;
    std::vector<std::size_t> final_shape;
    std::vector<double> pooled;
    std::vector<double> logits;
  };

  static std::uint64_t signature_of(const ForwardCache& cache);
  nn::Tensor to_input(const dsp::MelSpectrogram& features) const;
  ForwardCache run_forward(const dsp::MelSpectrogram& features) const;

  dsp::FeatureConfig feature_config_;
  dsp::FeatureStats stats_;
  std::array<nn::Parameter, 3> conv_w_;
  std::array<nn::Parameter, 3> conv_b_;
  nn::Parameter dense_w_;
  nn::Parameter dense_b_;
};

SerModel build_ser_model(std::uint64_t seed, const dsp::FeatureConfig& config = {});

// Throws EmptyDataset for an empty dataset and InvalidConfig for a bad config.
TrainReport train_ser(SerModel& model, const SerDataset& dataset, const TrainConfig& config);

struct SerMetrics {
  double accuracy = 0.0;
  // Empty for classes without examples.
  std::array<std::optional<double>, kNumEmotions> recall{};
  std::array<std::array<std::size_t, kNumEmotions>, kNumEmotions> confusion{};
  std::size_t total = 0;
};

SerMetrics evaluate_ser(const SerModel& model, const SerDataset& dataset);

// ---------------------------------------------------------------------------
// Data: ShEMO-style directories and the synthetic substitute.
// ---------------------------------------------------------------------------

// ShEMO file names carry the emotion letter at position 3, e.g. F01A01.wav:
// A anger, F fear, S sadness, H happiness, W surprise, N neutral.
std::optional<Emotion> emotion_from_shemo_name(std::string_view filename);

struct LabeledFile {
  std::filesystem::path path;
  Emotion label;
};

// Recursively lists *.wav files with a recognized emotion code, sorted by
// path. Files without a code are skipped.
std::vector<LabeledFile> list_shemo_directory(const std::filesystem::path& dir);

// Decodes, resamples to the config rate, and extracts raw log-mel features.
dsp::MelSpectrogram featurize_wav(std::span<const std::uint8_t> wav,
                                  const dsp::LogMelExtractor& extractor);

// Synthetic clip whose band-energy profile depends on the emotion: a cluster
// of harmonics in a class-specific frequency band with seeded jitter,
// amplitude modulation and background noise.
audio::AudioClip synthesize_emotion_clip(Emotion emotion, std::uint64_t seed,
                                         double seconds = 3.0, int sample_rate = 16000);

// Writes `per_class` clips per emotion as ShEMO-named WAV files.
std::vector<LabeledFile> write_synthetic_dataset(const std::filesystem::path& dir,
                                                 std::size_t per_class, std::uint64_t seed);

// Featurizes labeled files, fits normalization statistics into `model`, and
// returns the normalized dataset. With a cache directory, raw features are
// read from or written to <cache_dir>/<stem>.empf (32-bit floats, so cached
// values differ from fresh ones by float rounding).
SerDataset prepare_dataset(SerModel& model, const std::vector<LabeledFile>& files,
                           Split split, bool fit_stats,
                           const std::filesystem::path& cache_dir = {});

}  // namespace empath::ser
