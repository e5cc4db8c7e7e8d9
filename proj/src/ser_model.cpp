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

#include "empath/ser_model.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "empath/error.hpp"
#include "empath/nn/optim.hpp"
#include "empath/nn/rng.hpp"

namespace empath::ser {

using nn::Parameter;
using nn::Tensor;

std::string_view to_string(Emotion e) {
  switch (e) {
    case Emotion::Anger: return "anger";
    case Emotion::Fear: return "fear";
    case Emotion::Sadness: return "sadness";
    case Emotion::Happiness: return "happiness";
    case Emotion::Surprise: return "surprise";
    case Emotion::Neutrality: return "neutrality";
  }
  return "unknown";
}

std::optional<Emotion> parse_emotion(std::string_view name) {
  for (Emotion e : kAllEmotions) {
    if (to_string(e) == name) return e;
  }
  return std::nullopt;
}

Emotion EmotionDistribution::top() const {
  return static_cast<Emotion>(nn::argmax(probabilities));
}

std::optional<Emotion> filter_negative(const EmotionDistribution& dist, double threshold) {
  const Emotion top = dist.top();
  if (is_negative(top) && dist.probability(top) >= threshold) return top;
  return std::nullopt;
}

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

std::vector<double> tensor_from_config(const dsp::FeatureConfig& c) {
  return {static_cast<double>(c.sample_rate), static_cast<double>(c.frame_length),
          static_cast<double>(c.hop_length),  static_cast<double>(c.fft_size),
          static_cast<double>(c.n_mels),      c.f_min,
          c.f_max,                            static_cast<double>(c.target_frames),
          c.log_floor};
}

dsp::FeatureConfig config_from_tensor(const Tensor& t) {
  if (t.size() != 9) throw Error(ErrorCode::MalformedCheckpoint, "feature.config needs 9 values");
  dsp::FeatureConfig c;
  c.sample_rate = static_cast<int>(t.values[0]);
  c.frame_length = static_cast<int>(t.values[1]);
  c.hop_length = static_cast<int>(t.values[2]);
  c.fft_size = static_cast<int>(t.values[3]);
  c.n_mels = static_cast<int>(t.values[4]);
  c.f_min = t.values[5];
  c.f_max = t.values[6];
  c.target_frames = static_cast<int>(t.values[7]);
  c.log_floor = t.values[8];
  return c;
}

}  // namespace

SerModel build_ser_model(std::uint64_t seed, const dsp::FeatureConfig& config) {
  config.validate();
  SerModel m;
  m.feature_config_ = config;
  const auto bands = static_cast<std::size_t>(config.n_mels);
  m.stats_.mean.assign(bands, 0.0);
  m.stats_.stddev.assign(bands, 1.0);

  const nn::Rng root(seed);
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t c_in = SerModel::kChannels[s];
    const std::size_t c_out = SerModel::kChannels[s + 1];
    const std::string name = "conv" + std::to_string(s + 1);
    m.conv_w_[s] = Parameter(name + ".weights", {c_out, c_in, 3, 3});
    m.conv_b_[s] = Parameter(name + ".bias", {c_out});
    nn::Rng rng = root.split(name);
    nn::init_glorot_uniform(m.conv_w_[s].value, c_in * 9, c_out * 9, rng);
  }
  m.dense_w_ = Parameter("dense.weights", {kNumEmotions, SerModel::kChannels[3]});
  m.dense_b_ = Parameter("dense.bias", {kNumEmotions});
  nn::Rng rng = root.split("dense");
  nn::init_glorot_uniform(m.dense_w_.value, SerModel::kChannels[3], kNumEmotions, rng);
  return m;
}

nn::ParameterRefs SerModel::parameters() {
  return {&conv_w_[0], &conv_b_[0], &conv_w_[1], &conv_b_[1],
          &conv_w_[2], &conv_b_[2], &dense_w_,   &dense_b_};
}

std::size_t SerModel::parameter_count() const {
  std::size_t n = dense_w_.value.size() + dense_b_.value.size();
  for (std::size_t s = 0; s < 3; ++s) n += conv_w_[s].value.size() + conv_b_[s].value.size();
  return n;
}

Tensor SerModel::to_input(const dsp::MelSpectrogram& features) const {
  const auto frames = static_cast<std::size_t>(feature_config_.target_frames);
  const auto bands = static_cast<std::size_t>(feature_config_.n_mels);
  if (features.frames != frames || features.n_mels != bands ||
      features.values.size() != frames * bands) {
    throw Error(ErrorCode::ShapeMismatch,
                "model expects " + std::to_string(frames) + "x" + std::to_string(bands) +
                    " features, got " + std::to_string(features.frames) + "x" +
                    std::to_string(features.n_mels));
  }
  return Tensor({1, frames, bands}, features.values);
}

SerModel::ForwardCache SerModel::run_forward(const dsp::MelSpectrogram& features) const {
  ForwardCache cache;
  Tensor x = to_input(features);
  for (std::size_t s = 0; s < 3; ++s) {
    StageCache& sc = cache.stages[s];
    Tensor z = nn::conv2d_forward(x, conv_w_[s].value, conv_b_[s].value.span());
    nn::relu_inplace(z.span());
    sc.pool_input_shape = z.shape;
    Tensor cropped = nn::crop_to_even(z);
    nn::PoolResult pooled = nn::maxpool2d_forward(cropped);
    sc.input = std::move(x);
    sc.activated = std::move(z);
    sc.argmax = std::move(pooled.argmax);
    x = std::move(pooled.output);
  }
  cache.final_shape = x.shape;
  cache.pooled = nn::global_avg_pool(x);
  cache.logits = nn::dense_forward(cache.pooled, dense_w_.value, dense_b_.value.span());
  return cache;
}

std::array<double, kNumEmotions> SerModel::logits(const dsp::MelSpectrogram& features) const {
  const ForwardCache cache = run_forward(features);
  std::array<double, kNumEmotions> out{};
  std::copy(cache.logits.begin(), cache.logits.end(), out.begin());
  return out;
}

EmotionDistribution SerModel::forward(const dsp::MelSpectrogram& features) const {
  const auto z = logits(features);
  const std::vector<double> p = nn::softmax(z);
  EmotionDistribution d;
  std::copy(p.begin(), p.end(), d.probabilities.begin());
  return d;
}

double SerModel::accumulate_gradients(const dsp::MelSpectrogram& features, Emotion label,
                                      double scale, Emotion* predicted) {
  const ForwardCache cache = run_forward(features);
  if (predicted) *predicted = static_cast<Emotion>(nn::argmax(cache.logits));
  const nn::LossAndGrad lg = nn::softmax_cross_entropy(cache.logits, index_of(label));

  std::vector<double> g_logits = lg.grad;
  for (double& g : g_logits) g *= scale;
  nn::DenseGrads dg = nn::dense_backward(g_logits, cache.pooled, dense_w_.value);
  for (std::size_t i = 0; i < dg.weights.size(); ++i) dense_w_.grad.values[i] += dg.weights.values[i];
  for (std::size_t i = 0; i < dg.bias.size(); ++i) dense_b_.grad.values[i] += dg.bias[i];

  Tensor g = nn::global_avg_pool_backward(dg.input, cache.final_shape);
  for (std::size_t s = 3; s-- > 0;) {
    const StageCache& sc = cache.stages[s];
    std::vector<std::size_t> cropped_shape = sc.pool_input_shape;
    cropped_shape[1] -= cropped_shape[1] % 2;
    cropped_shape[2] -= cropped_shape[2] % 2;
    Tensor g_cropped = nn::maxpool2d_backward(g, sc.argmax, cropped_shape);
    Tensor g_act = nn::uncrop(g_cropped, sc.pool_input_shape);
    nn::relu_backward_inplace(g_act.span(), sc.activated.span());
    nn::Conv2dGrads cg = nn::conv2d_backward(g_act, sc.input, conv_w_[s].value, s > 0);
    for (std::size_t i = 0; i < cg.weights.size(); ++i) {
      conv_w_[s].grad.values[i] += cg.weights.values[i];
    }
    for (std::size_t i = 0; i < cg.bias.size(); ++i) conv_b_[s].grad.values[i] += cg.bias[i];
    if (s > 0) g = std::move(cg.input);
  }
  return lg.loss;
}

std::uint64_t SerModel::signature_of(const ForwardCache& cache) {
  std::uint64_t h = 0;
  for (const StageCache& sc : cache.stages) {
    for (double v : sc.activated.values) h = mix(h, v > 0.0 ? 1U : 0U);
    for (std::size_t a : sc.argmax) h = mix(h, a);
  }
  return h;
}

std::uint64_t SerModel::branch_signature(const dsp::MelSpectrogram& features) const {
  return signature_of(run_forward(features));
}

std::array<double, kNumEmotions> SerModel::logits(const dsp::MelSpectrogram& features,
                                                  std::uint64_t& signature) const {
  const ForwardCache cache = run_forward(features);
  signature = signature_of(cache);
  std::array<double, kNumEmotions> out{};
  std::copy(cache.logits.begin(), cache.logits.end(), out.begin());
  return out;
}

dsp::MelSpectrogram SerModel::normalize(const dsp::MelSpectrogram& raw) const {
  return dsp::normalize_features(raw, stats_);
}

nn::Checkpoint SerModel::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.kind = nn::ModelKind::Ser;
  for (std::size_t s = 0; s < 3; ++s) {
    ckpt.add(conv_w_[s].name, conv_w_[s].value);
    ckpt.add(conv_b_[s].name, conv_b_[s].value);
  }
  ckpt.add(dense_w_.name, dense_w_.value);
  ckpt.add(dense_b_.name, dense_b_.value);
  ckpt.add("feature.config", Tensor({9}, tensor_from_config(feature_config_)));
  ckpt.add("feature.mean", Tensor({stats_.mean.size()}, stats_.mean));
  ckpt.add("feature.std", Tensor({stats_.stddev.size()}, stats_.stddev));
  return ckpt;
}

SerModel SerModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.kind != nn::ModelKind::Ser) {
    throw Error(ErrorCode::MalformedCheckpoint, "checkpoint does not hold a SER model");
  }
  SerModel m = build_ser_model(0, config_from_tensor(ckpt.tensor("feature.config")));
  auto load = [&ckpt](Parameter& p) {
    const Tensor& t = ckpt.tensor(p.name);
    if (t.shape != p.value.shape) {
      throw Error(ErrorCode::MalformedCheckpoint, p.name + " has shape " +
                                                      nn::shape_string(t.shape));
    }
    p.value = t;
  };
  for (Parameter* p : m.parameters()) load(*p);
  m.stats_.mean = ckpt.tensor("feature.mean").values;
  m.stats_.stddev = ckpt.tensor("feature.std").values;
  if (m.stats_.mean.size() != static_cast<std::size_t>(m.feature_config_.n_mels) ||
      m.stats_.stddev.size() != m.stats_.mean.size()) {
    throw Error(ErrorCode::MalformedCheckpoint, "normalization stats do not match n_mels");
  }
  return m;
}

TrainReport train_ser(SerModel& model, const SerDataset& dataset, const TrainConfig& config) {
  if (dataset.examples.empty()) throw Error(ErrorCode::EmptyDataset, "no training examples");
  config.validate();

  nn::ParameterRefs params = model.parameters();
  nn::Adam adam(params, {.lr = config.learning_rate});
  nn::Rng rng = nn::Rng(config.seed).split("shuffle");
  std::vector<std::size_t> order(dataset.examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainReport report;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      nn::zero_grads(params);
      for (std::size_t i = start; i < end; ++i) {
        const Example& ex = dataset.examples[order[i]];
        Emotion predicted{};
        loss_sum += model.accumulate_gradients(ex.features, ex.label, scale, &predicted);
        if (predicted == ex.label) ++correct;
      }
      adam.step(params);
    }
    const auto n = static_cast<double>(order.size());
    report.epochs.push_back({loss_sum / n, static_cast<double>(correct) / n});
  }
  return report;
}

SerMetrics evaluate_ser(const SerModel& model, const SerDataset& dataset) {
  if (dataset.examples.empty()) throw Error(ErrorCode::EmptyDataset, "no evaluation examples");
  SerMetrics m;
  std::size_t correct = 0;
  for (const Example& ex : dataset.examples) {
    const Emotion predicted = model.forward(ex.features).top();
    ++m.confusion[index_of(ex.label)][index_of(predicted)];
    if (predicted == ex.label) ++correct;
  }
  m.total = dataset.examples.size();
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.total);
  for (std::size_t c = 0; c < kNumEmotions; ++c) {
    const std::size_t row = std::accumulate(m.confusion[c].begin(), m.confusion[c].end(),
                                            std::size_t{0});
    if (row > 0) m.recall[c] = static_cast<double>(m.confusion[c][c]) / static_cast<double>(row);
  }
  return m;
}

std::optional<Emotion> emotion_from_shemo_name(std::string_view filename) {
  if (filename.size() < 4) return std::nullopt;
  switch (filename[3]) {
    case 'A': return Emotion::Anger;
    case 'F': return Emotion::Fear;
    case 'S': return Emotion::Sadness;
    case 'H': return Emotion::Happiness;
    case 'W': return Emotion::Surprise;
    case 'N': return Emotion::Neutrality;
    default: return std::nullopt;
  }
}

std::vector<LabeledFile> list_shemo_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
  std::vector<LabeledFile> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext != ".wav") continue;
    if (auto e = emotion_from_shemo_name(entry.path().filename().string())) {
      files.push_back({entry.path(), *e});
    }
  }
  std::sort(files.begin(), files.end(),
            [](const LabeledFile& a, const LabeledFile& b) { return a.path < b.path; });
  return files;
}

dsp::MelSpectrogram featurize_wav(std::span<const std::uint8_t> wav,
                                  const dsp::LogMelExtractor& extractor) {
  audio::AudioClip clip = audio::read_wav(wav);
  if (clip.sample_rate != extractor.config().sample_rate) {
    clip = audio::resample_linear(clip, extractor.config().sample_rate);
  }
  return extractor.compute(clip);
}

audio::AudioClip synthesize_emotion_clip(Emotion emotion, std::uint64_t seed, double seconds,
                                         int sample_rate) {
  // Fundamental band per class, in Hz.
  static constexpr std::array<double, kNumEmotions> kBase = {2600.0, 1500.0, 220.0,
                                                             800.0,  5000.0, 420.0};
  // Amplitude-modulation rate per class, in Hz.
  static constexpr std::array<double, kNumEmotions> kTremolo = {7.0, 11.0, 1.5, 4.0, 3.0, 0.5};

  nn::Rng rng = nn::Rng(seed).split(to_string(emotion));
  const std::size_t c = index_of(emotion);
  const double f0 = kBase[c] * rng.uniform(0.92, 1.08);
  const double am_rate = kTremolo[c] * rng.uniform(0.8, 1.2);
  const double amp = rng.uniform(0.10, 0.16);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

  audio::AudioClip clip;
  clip.sample_rate = sample_rate;
  const auto n = static_cast<std::size_t>(seconds * sample_rate);
  clip.samples.resize(n);
  const double ratios[3] = {1.0, 1.25, 1.5};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double env = 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * am_rate * t + phase);
    double v = 0.0;
    for (double r : ratios) v += std::sin(2.0 * std::numbers::pi * f0 * r * t + phase * r);
    clip.samples[i] = amp * env * v + 0.01 * rng.normal();
  }
  return clip;
}

std::vector<LabeledFile> write_synthetic_dataset(const std::filesystem::path& dir,
                                                 std::size_t per_class, std::uint64_t seed) {
  static constexpr char kCodes[kNumEmotions] = {'A', 'F', 'S', 'H', 'W', 'N'};
  std::filesystem::create_directories(dir);
  std::vector<LabeledFile> files;
  for (Emotion e : kAllEmotions) {
    for (std::size_t k = 0; k < per_class; ++k) {
      const std::size_t speaker = k % 6 + 1;
      char name[32];
      std::snprintf(name, sizeof(name), "%c%02zu%c%02zu.wav", (k % 2) ? 'M' : 'F', speaker,
                    kCodes[index_of(e)], k + 1);
      const std::filesystem::path path = dir / name;
      const audio::AudioClip clip =
          synthesize_emotion_clip(e, seed * 1000003ULL + index_of(e) * 1009ULL + k);
      const auto bytes = audio::write_wav(clip);
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
      if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
      files.push_back({path, e});
    }
  }
  std::sort(files.begin(), files.end(),
            [](const LabeledFile& a, const LabeledFile& b) { return a.path < b.path; });
  return files;
}

SerDataset prepare_dataset(SerModel& model, const std::vector<LabeledFile>& files, Split split,
                           bool fit_stats, const std::filesystem::path& cache_dir) {
  if (files.empty()) throw Error(ErrorCode::EmptyDataset, "no labeled audio files");
  const dsp::LogMelExtractor extractor(model.feature_config());
  std::vector<dsp::MelSpectrogram> raw;
  raw.reserve(files.size());
  if (!cache_dir.empty()) std::filesystem::create_directories(cache_dir);
  for (const LabeledFile& f : files) {
    if (cache_dir.empty()) {
      raw.push_back(featurize_wav(nn::read_file_bytes(f.path), extractor));
      continue;
    }
    const std::filesystem::path cached = cache_dir / f.path.filename().replace_extension(".empf");
    if (std::filesystem::exists(cached)) {
      try {
        raw.push_back(dsp::read_feature_cache(cached, model.feature_config()));
        continue;
      } catch (const Error&) {
        // stale or foreign cache entry: recompute below
      }
    }
    raw.push_back(featurize_wav(nn::read_file_bytes(f.path), extractor));
    dsp::write_feature_cache(cached, raw.back());
  }
  if (fit_stats) model.set_feature_stats(dsp::compute_feature_stats(raw));
  SerDataset ds;
  ds.split = split;
  for (std::size_t i = 0; i < files.size(); ++i) {
    ds.examples.push_back({model.normalize(raw[i]), files[i].label});
  }
  return ds;
}

}  // namespace empath::ser
