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

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "empath/audio_io.hpp"

namespace empath::dsp {

struct FeatureConfig {
  int sample_rate = 16000;
  int frame_length = 400;  // 25 ms
  int hop_length = 160;    // 10 ms
  int fft_size = 512;
  int n_mels = 64;
  double f_min = 0.0;
  double f_max = 8000.0;
  int target_frames = 300;  // 3 s
  double log_floor = 1e-10;

  // Throws InvalidConfig when an invariant does not hold.
  void validate() const;

  bool operator==(const FeatureConfig&) const = default;
};

// Row-major frames x n_mels log energies.
struct MelSpectrogram {
  std::size_t frames = 0;
  std::size_t n_mels = 0;
  std::vector<double> values;
  // Rows computed from audio; rows past this index are log-floor padding.
  std::size_t valid_frames = 0;
  FeatureConfig config;

  double at(std::size_t frame, std::size_t band) const { return values[frame * n_mels + band]; }
  double& at(std::size_t frame, std::size_t band) { return values[frame * n_mels + band]; }
};

// Row-major frames; each row holds frame_length samples.
struct FrameMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values).subspan(r * cols, cols);
  }
};

std::vector<double> hamming_window(std::size_t n);

FrameMatrix frame_signal(std::span<const double> samples, std::size_t frame_length,
                         std::size_t hop_length);

// Radix-2 plan with exact per-index twiddles. Throws NonPowerOfTwoSize.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const { return n_; }
  // One-sided spectrum of a real frame of length <= size(), zero-padded.
  void forward_real(std::span<const double> frame, std::span<std::complex<double>> out) const;

 private:
  std::size_t n_;
  std::vector<std::size_t> bit_reverse_;
  std::vector<std::complex<double>> twiddles_;
};

// One-sided unnormalized DFT of a power-of-two length frame, N/2+1 bins.
std::vector<std::complex<double>> fft_real(std::span<const double> frame);

std::vector<double> power_spectrum(std::span<const std::complex<double>> spectrum);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Sparse triangular filter: weights for bins [first_bin, first_bin + weights.size()).
struct MelFilter {
  std::size_t first_bin = 0;
  std::size_t center_bin = 0;
  std::vector<double> weights;
};

class MelFilterbank {
 public:
  explicit MelFilterbank(const FeatureConfig& config);

  std::size_t num_filters() const { return filters_.size(); }
  std::size_t num_bins() const { return num_bins_; }
  const MelFilter& filter(std::size_t m) const { return filters_[m]; }

  // Dense n_mels x (fft_size/2 + 1) row-major weight matrix.
  std::vector<double> dense() const;

  // Center frequency (Hz) of each filter on the continuous mel grid.
  const std::vector<double>& center_hz() const { return center_hz_; }

  void apply(std::span<const double> power, std::span<double> energies) const;

 private:
  std::size_t num_bins_ = 0;
  std::vector<MelFilter> filters_;
  std::vector<double> center_hz_;
};

// Precomputed window, FFT plan and filterbank, shareable read-only across
// threads. compute() runs frames in parallel; compute_serial() is the
// single-threaded reference with bit-identical output.
class LogMelExtractor {
 public:
  explicit LogMelExtractor(const FeatureConfig& config);

  const FeatureConfig& config() const { return config_; }
  const MelFilterbank& filterbank() const { return filterbank_; }

  MelSpectrogram compute(const audio::AudioClip& clip) const;
  MelSpectrogram compute_serial(const audio::AudioClip& clip) const;

 private:
  MelSpectrogram run(const audio::AudioClip& clip, bool parallel) const;
  void frame_energies(std::span<const double> samples, std::size_t frame,
                      std::span<double> out) const;

  FeatureConfig config_;
  std::vector<double> window_;
  FftPlan fft_;
  MelFilterbank filterbank_;
};

MelSpectrogram log_mel_spectrogram(const audio::AudioClip& clip, const FeatureConfig& config);

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

// Per-band mean and population standard deviation over every row of every
// spectrogram. Bands with zero deviation get std = 1.
FeatureStats compute_feature_stats(std::span<const MelSpectrogram> specs);

MelSpectrogram normalize_features(const MelSpectrogram& spec, const FeatureStats& stats);

// Feature cache: "EMPF", version, frames, n_mels as u32 LE, then f32 values.
void write_feature_cache(const std::filesystem::path& path, const MelSpectrogram& spec);
MelSpectrogram read_feature_cache(const std::filesystem::path& path, const FeatureConfig& config);

}  // namespace empath::dsp
