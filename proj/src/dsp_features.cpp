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

#include "empath/dsp_features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "empath/error.hpp"

namespace empath::dsp {

namespace {

constexpr std::uint32_t kCacheVersion = 1;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidConfig, what);
}

}  // namespace

void FeatureConfig::validate() const {
  require(sample_rate > 0, "sample_rate must be positive");
  require(frame_length >= 1, "frame_length must be >= 1");
  require(frame_length <= fft_size, "frame_length must not exceed fft_size");
  require(hop_length >= 1, "hop_length must be >= 1");
  require(f_min >= 0.0 && f_min < f_max, "f_min must be in [0, f_max)");
  require(f_max <= sample_rate / 2.0, "f_max must not exceed the Nyquist frequency");
  require(n_mels >= 2, "n_mels must be >= 2");
  require(target_frames >= 1, "target_frames must be >= 1");
  require(log_floor > 0.0, "log_floor must be positive");
  if (!std::has_single_bit(static_cast<unsigned>(fft_size))) {
    throw Error(ErrorCode::NonPowerOfTwoSize, std::to_string(fft_size));
  }
}

std::vector<double> hamming_window(std::size_t n) {
  if (n <= 1) return std::vector<double>(n, 1.0);
  std::vector<double> w(n);
  const double denom = static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / denom);
  }
  // cos is not bit-symmetric around pi; mirror so w[k] == w[n-1-k] exactly.
  for (std::size_t k = 0; k < n / 2; ++k) w[n - 1 - k] = w[k];
  return w;
}

FrameMatrix frame_signal(std::span<const double> samples, std::size_t frame_length,
                         std::size_t hop_length) {
  if (hop_length == 0) throw Error(ErrorCode::InvalidConfig, "hop_length must be >= 1");
  FrameMatrix frames;
  frames.cols = frame_length;
  if (samples.empty()) return frames;
  const std::size_t excess = samples.size() > frame_length ? samples.size() - frame_length : 0;
  frames.rows = (excess + hop_length - 1) / hop_length + 1;
  frames.values.assign(frames.rows * frame_length, 0.0);
  for (std::size_t i = 0; i < frames.rows; ++i) {
    const std::size_t start = i * hop_length;
    const std::size_t count =
        start < samples.size() ? std::min(frame_length, samples.size() - start) : 0;
    std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>(start), count,
                frames.values.begin() + static_cast<std::ptrdiff_t>(i * frame_length));
  }
  return frames;
}

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (n == 0 || !std::has_single_bit(n)) {
    throw Error(ErrorCode::NonPowerOfTwoSize, "FFT size " + std::to_string(n));
  }
  const int bits = std::countr_zero(n);
  bit_reverse_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (int b = 0; b < bits; ++b) r |= ((i >> b) & 1U) << (bits - 1 - b);
    bit_reverse_[i] = r;
  }
  twiddles_.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddles_[k] = {std::cos(angle), std::sin(angle)};
  }
}

void FftPlan::forward_real(std::span<const double> frame,
                           std::span<std::complex<double>> out) const {
  if (frame.size() > n_) {
    throw Error(ErrorCode::ShapeMismatch, "frame longer than FFT size");
  }
  if (out.size() != n_ / 2 + 1) {
    throw Error(ErrorCode::ShapeMismatch, "output must hold N/2+1 bins");
  }
  std::vector<std::complex<double>> buf(n_);
  for (std::size_t i = 0; i < frame.size(); ++i) buf[bit_reverse_[i]] = frame[i];

  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const std::complex<double> t = twiddles_[k * stride] * buf[start + k + half];
        const std::complex<double> u = buf[start + k];
        buf[start + k] = u + t;
        buf[start + k + half] = u - t;
      }
    }
  }
  std::copy_n(buf.begin(), n_ / 2 + 1, out.begin());
}

std::vector<std::complex<double>> fft_real(std::span<const double> frame) {
  FftPlan plan(frame.size());
  std::vector<std::complex<double>> out(frame.size() / 2 + 1);
  plan.forward_real(frame, out);
  return out;
}

std::vector<double> power_spectrum(std::span<const std::complex<double>> spectrum) {
  std::vector<double> p(spectrum.size());
  for (std::size_t k = 0; k < spectrum.size(); ++k) p[k] = std::norm(spectrum[k]);
  return p;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(const FeatureConfig& config) {
  config.validate();
  const auto n_mels = static_cast<std::size_t>(config.n_mels);
  const auto fft_size = static_cast<std::size_t>(config.fft_size);
  num_bins_ = fft_size / 2 + 1;

  const double mel_lo = hz_to_mel(config.f_min);
  const double mel_hi = hz_to_mel(config.f_max);
  const double step = (mel_hi - mel_lo) / static_cast<double>(n_mels + 1);
  std::vector<std::size_t> bins(n_mels + 2);
  for (std::size_t p = 0; p < n_mels + 2; ++p) {
    const double hz = mel_to_hz(mel_lo + step * static_cast<double>(p));
    const double pos = hz * static_cast<double>(fft_size) / config.sample_rate;
    bins[p] = std::min(static_cast<std::size_t>(std::lround(pos)), num_bins_ - 1);
    if (p > 0 && p <= n_mels) center_hz_.push_back(hz);
  }
  for (std::size_t p = 1; p < bins.size(); ++p) {
    if (bins[p] <= bins[p - 1]) {
      throw Error(ErrorCode::TooFewBins,
                  std::to_string(num_bins_) + " FFT bins cannot hold " +
                      std::to_string(n_mels + 2) + " distinct mel points");
    }
  }

  filters_.resize(n_mels);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const std::size_t left = bins[m];
    const std::size_t center = bins[m + 1];
    const std::size_t right = bins[m + 2];
    MelFilter& f = filters_[m];
    f.first_bin = left;
    f.center_bin = center;
    f.weights.resize(right - left + 1);
    for (std::size_t k = left; k <= right; ++k) {
      double w = 0.0;
      if (k <= center) {
        w = static_cast<double>(k - left) / static_cast<double>(center - left);
      } else {
        w = static_cast<double>(right - k) / static_cast<double>(right - center);
      }
      f.weights[k - left] = w;
    }
  }
}

std::vector<double> MelFilterbank::dense() const {
  std::vector<double> m(filters_.size() * num_bins_, 0.0);
  for (std::size_t r = 0; r < filters_.size(); ++r) {
    const MelFilter& f = filters_[r];
    std::copy(f.weights.begin(), f.weights.end(),
              m.begin() + static_cast<std::ptrdiff_t>(r * num_bins_ + f.first_bin));
  }
  return m;
}

void MelFilterbank::apply(std::span<const double> power, std::span<double> energies) const {
  for (std::size_t m = 0; m < filters_.size(); ++m) {
    const MelFilter& f = filters_[m];
    double acc = 0.0;
    for (std::size_t j = 0; j < f.weights.size(); ++j) acc += f.weights[j] * power[f.first_bin + j];
    energies[m] = acc;
  }
}

LogMelExtractor::LogMelExtractor(const FeatureConfig& config)
    : config_(config),
      window_(hamming_window(static_cast<std::size_t>(config.frame_length))),
      fft_(static_cast<std::size_t>(config.fft_size)),
      filterbank_(config) {}

void LogMelExtractor::frame_energies(std::span<const double> samples, std::size_t frame,
                                     std::span<double> out) const {
  const auto frame_length = static_cast<std::size_t>(config_.frame_length);
  const std::size_t start = frame * static_cast<std::size_t>(config_.hop_length);
  std::vector<double> buf(frame_length, 0.0);
  const std::size_t count =
      start < samples.size() ? std::min(frame_length, samples.size() - start) : 0;
  for (std::size_t i = 0; i < count; ++i) buf[i] = samples[start + i] * window_[i];

  std::vector<std::complex<double>> spectrum(fft_.size() / 2 + 1);
  fft_.forward_real(buf, spectrum);
  const std::vector<double> power = power_spectrum(spectrum);
  filterbank_.apply(power, out);
  for (double& e : out) e = std::log(e + config_.log_floor);
}

MelSpectrogram LogMelExtractor::run(const audio::AudioClip& clip, bool parallel) const {
  if (clip.sample_rate != config_.sample_rate) {
    throw Error(ErrorCode::SampleRateMismatch,
                "clip at " + std::to_string(clip.sample_rate) + " Hz, features expect " +
                    std::to_string(config_.sample_rate) + " Hz");
  }
  if (clip.samples.empty()) throw Error(ErrorCode::EmptyClip, "no samples to featurize");

  const auto frame_length = static_cast<std::size_t>(config_.frame_length);
  const auto hop = static_cast<std::size_t>(config_.hop_length);
  const std::size_t n = clip.samples.size();
  const std::size_t excess = n > frame_length ? n - frame_length : 0;
  const std::size_t total_frames = (excess + hop - 1) / hop + 1;

  MelSpectrogram spec;
  spec.config = config_;
  spec.frames = static_cast<std::size_t>(config_.target_frames);
  spec.n_mels = static_cast<std::size_t>(config_.n_mels);
  spec.valid_frames = std::min(total_frames, spec.frames);
  spec.values.assign(spec.frames * spec.n_mels, std::log(config_.log_floor));

  const std::span<const double> samples(clip.samples);
  const auto valid = static_cast<std::ptrdiff_t>(spec.valid_frames);
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t f = 0; f < valid; ++f) {
      frame_energies(samples, static_cast<std::size_t>(f),
                     std::span<double>(spec.values).subspan(static_cast<std::size_t>(f) * spec.n_mels,
                                                            spec.n_mels));
    }
  } else {
    for (std::ptrdiff_t f = 0; f < valid; ++f) {
      frame_energies(samples, static_cast<std::size_t>(f),
                     std::span<double>(spec.values).subspan(static_cast<std::size_t>(f) * spec.n_mels,
                                                            spec.n_mels));
    }
  }
  return spec;
}

MelSpectrogram LogMelExtractor::compute(const audio::AudioClip& clip) const {
  return run(clip, true);
}

MelSpectrogram LogMelExtractor::compute_serial(const audio::AudioClip& clip) const {
  return run(clip, false);
}

MelSpectrogram log_mel_spectrogram(const audio::AudioClip& clip, const FeatureConfig& config) {
  return LogMelExtractor(config).compute(clip);
}

FeatureStats compute_feature_stats(std::span<const MelSpectrogram> specs) {
  if (specs.empty()) throw Error(ErrorCode::EmptyDataset, "no spectrograms for statistics");
  const std::size_t bands = specs.front().n_mels;
  std::vector<double> sum(bands, 0.0);
  std::size_t rows = 0;
  for (const MelSpectrogram& s : specs) {
    if (s.n_mels != bands) throw Error(ErrorCode::ShapeMismatch, "band count differs across set");
    for (std::size_t f = 0; f < s.frames; ++f) {
      for (std::size_t b = 0; b < bands; ++b) sum[b] += s.at(f, b);
    }
    rows += s.frames;
  }
  FeatureStats stats;
  stats.mean.resize(bands);
  stats.stddev.assign(bands, 0.0);
  for (std::size_t b = 0; b < bands; ++b) stats.mean[b] = sum[b] / static_cast<double>(rows);
  for (const MelSpectrogram& s : specs) {
    for (std::size_t f = 0; f < s.frames; ++f) {
      for (std::size_t b = 0; b < bands; ++b) {
        const double d = s.at(f, b) - stats.mean[b];
        stats.stddev[b] += d * d;
      }
    }
  }
  for (double& sd : stats.stddev) {
    sd = std::sqrt(sd / static_cast<double>(rows));
    if (!(sd > 0.0)) sd = 1.0;
  }
  return stats;
}

MelSpectrogram normalize_features(const MelSpectrogram& spec, const FeatureStats& stats) {
  if (stats.mean.size() != spec.n_mels || stats.stddev.size() != spec.n_mels) {
    throw Error(ErrorCode::ShapeMismatch, "stats cover " + std::to_string(stats.mean.size()) +
                                              " bands, spectrogram has " +
                                              std::to_string(spec.n_mels));
  }
  MelSpectrogram out = spec;
  for (std::size_t f = 0; f < out.frames; ++f) {
    for (std::size_t b = 0; b < out.n_mels; ++b) {
      const double sd = stats.stddev[b] > 0.0 ? stats.stddev[b] : 1.0;
      out.at(f, b) = (out.at(f, b) - stats.mean[b]) / sd;
    }
  }
  return out;
}

void write_feature_cache(const std::filesystem::path& path, const MelSpectrogram& spec) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  auto put = [&out](std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  out.write("EMPF", 4);
  put(kCacheVersion);
  put(static_cast<std::uint32_t>(spec.frames));
  put(static_cast<std::uint32_t>(spec.n_mels));
  for (double v : spec.values) put(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

MelSpectrogram read_feature_cache(const std::filesystem::path& path, const FeatureConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  auto get = [&in, &path]() {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
      throw Error(ErrorCode::MalformedContainer, "truncated feature cache " + path.string());
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  };
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "EMPF") {
    throw Error(ErrorCode::MalformedContainer, "bad feature cache magic in " + path.string());
  }
  if (get() != kCacheVersion) {
    throw Error(ErrorCode::MalformedContainer, "unsupported feature cache version");
  }
  MelSpectrogram spec;
  spec.config = config;
  spec.frames = get();
  spec.n_mels = get();
  if (spec.frames != static_cast<std::size_t>(config.target_frames) ||
      spec.n_mels != static_cast<std::size_t>(config.n_mels)) {
    throw Error(ErrorCode::ShapeMismatch, "cached features do not match the feature config");
  }
  spec.valid_frames = spec.frames;
  spec.values.resize(spec.frames * spec.n_mels);
  for (double& v : spec.values) v = std::bit_cast<float>(get());
  return spec;
}

}  // namespace empath::dsp
