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

#include <cmath>
#include <filesystem>
#include <numbers>

#include "empath/dsp_features.hpp"
#include "empath/error.hpp"
#include "empath/nn/rng.hpp"
#include "reference.hpp"

using namespace empath;
using namespace empath::dsp;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); }

audio::AudioClip sine(double hz, double seconds, double amp = 0.5, int rate = 16000) {
  audio::AudioClip clip{{}, rate};
  const auto n = static_cast<std::size_t>(seconds * rate);
  for (std::size_t i = 0; i < n; ++i) clip.samples.push_back(amp * std::sin(2 * std::numbers::pi * hz * i / rate));
  return clip;
}

}  // namespace

TEST_CASE("hamming window") {
  CHECK(hamming_window(1) == std::vector<double>{1.0});
  const auto w3 = hamming_window(3);
  CHECK(w3[0] == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(w3[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w3[2] == doctest::Approx(0.08).epsilon(1e-12));
  const auto w = hamming_window(400);
  for (std::size_t k = 0; k < w.size(); ++k) CHECK(w[k] == w[w.size() - 1 - k]);
}

TEST_CASE("frame_signal counts and padding") {
  std::vector<double> s(600, 1.0);
  CHECK(frame_signal(std::span(s).first(400), 400, 160).rows == 1);
  // 560 samples: the second frame spans [160, 560) and needs no padding.
  const auto exact = frame_signal(std::span(s).first(560), 400, 160);
  REQUIRE(exact.rows == 2);
  for (double v : exact.row(1)) CHECK(v == 1.0);
  // 600 samples: three frames, the last one holds 280 samples then 120 zeros.
  const auto padded = frame_signal(s, 400, 160);
  REQUIRE(padded.rows == 3);
  const auto last = padded.row(2);
  for (std::size_t i = 0; i < 400; ++i) CHECK(last[i] == (i < 280 ? 1.0 : 0.0));
  CHECK(frame_signal({}, 400, 160).rows == 0);
  std::vector<double> short_clip(10, 1.0);
  CHECK(frame_signal(short_clip, 400, 160).rows == 1);
}

TEST_CASE("fft_real against the naive DFT") {
  nn::Rng rng(3);
  for (std::size_t n : {8u, 64u, 256u, 512u}) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> x(n);
      for (double& v : x) v = rng.uniform(-1.0, 1.0);
      const auto fast = fft_real(x);
      const auto slow = reference::naive_dft(x);
      REQUIRE(fast.size() == n / 2 + 1);
      double scale = 0.0;
      for (const auto& c : slow) scale = std::max(scale, std::abs(c));
      for (std::size_t k = 0; k < fast.size(); ++k) CHECK(std::abs(fast[k] - slow[k]) <= 1e-9 * scale);
    }
  }
}

TEST_CASE("fft_real special inputs") {
  std::vector<double> zeros(16, 0.0);
  for (const auto& c : fft_real(zeros)) CHECK(c == std::complex<double>(0.0, 0.0));
  std::vector<double> impulse(16, 0.0);
  impulse[0] = 1.0;
  for (const auto& c : fft_real(impulse)) CHECK(c == std::complex<double>(1.0, 0.0));
  std::vector<double> bad(12, 0.0);
  CHECK_THROWS_AS(fft_real(bad), Error);
  CHECK_THROWS_AS(FftPlan(0), Error);
}

TEST_CASE("power spectrum and Parseval") {
  const std::vector<std::complex<double>> s = {{1, 0}, {3, 4}};
  CHECK(power_spectrum(s) == std::vector<double>{1.0, 25.0});
  nn::Rng rng(5);
  const std::size_t n = 256;
  std::vector<double> x(n);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  const auto p = power_spectrum(fft_real(x));
  double time = 0.0, freq = p[0] + p[n / 2];
  for (double v : x) time += v * v;
  for (std::size_t k = 1; k < n / 2; ++k) freq += 2.0 * p[k];
  CHECK(rel(time, freq / n) < 1e-9);
}

TEST_CASE("mel scale") {
  CHECK(hz_to_mel(0.0) == 0.0);
  CHECK(std::abs(hz_to_mel(1000.0) - 1000.0) <= 0.5);
  for (double f : {100.0, 1000.0, 8000.0}) CHECK(rel(mel_to_hz(hz_to_mel(f)), f) < 1e-9);
}

TEST_CASE("mel filterbank shape and coverage") {
  const FeatureConfig cfg;
  const MelFilterbank fb(cfg);
  const auto dense = fb.dense();
  const std::size_t bins = fb.num_bins();
  REQUIRE(dense.size() == 64 * bins);
  for (std::size_t m = 0; m < 64; ++m) {
    double mx = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double w = dense[m * bins + k];
      CHECK(w >= 0.0);
      CHECK(w <= 1.0);
      mx = std::max(mx, w);
    }
    CHECK(mx == 1.0);
    if (m > 0) CHECK(fb.center_hz()[m] > fb.center_hz()[m - 1]);
  }
  const auto lo = static_cast<std::size_t>(std::ceil(cfg.f_min * cfg.fft_size / cfg.sample_rate));
  const auto hi = static_cast<std::size_t>(std::floor(cfg.f_max * cfg.fft_size / cfg.sample_rate));
  // Edge bins sit at the feet of the outer triangles (weight 0), so the scan
  // covers the open interval between them.
  for (std::size_t k = lo + 1; k < hi; ++k) {
    double col = 0.0;
    for (std::size_t m = 0; m < 64; ++m) col += dense[m * bins + k];
    CHECK(col > 0.0);
  }
}

TEST_CASE("mel filterbank needs enough bins") {
  FeatureConfig cfg;
  cfg.fft_size = 64;
  cfg.frame_length = 64;
  cfg.n_mels = 40;
  CHECK_THROWS_AS(MelFilterbank{cfg}, Error);
  try {
    MelFilterbank fb(cfg);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewBins);
  }
}

TEST_CASE("config validation") {
  FeatureConfig cfg;
  cfg.frame_length = 1024;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.fft_size = 500;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.f_max = 9000;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.n_mels = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("log-mel of silence is the floor everywhere") {
  const audio::AudioClip silent{std::vector<double>(48000, 0.0), 16000};
  const auto spec = log_mel_spectrogram(silent, {});
  CHECK(spec.frames == 300);
  CHECK(spec.n_mels == 64);
  for (double v : spec.values) CHECK(v == std::log(1e-10));
}

TEST_CASE("short clips are padded, long clips truncated") {
  const auto one = log_mel_spectrogram(sine(300, 1.0), {});
  CHECK(one.frames == 300);
  // 16000 samples: ceil((16000 - 400) / 160) + 1.
  CHECK(one.valid_frames == 99);
  for (std::size_t f = one.valid_frames; f < one.frames; ++f) CHECK(one.at(f, 10) == std::log(1e-10));
  const auto tiny = log_mel_spectrogram({{0.5}, 16000}, {});
  CHECK(tiny.frames == 300);
  const auto longer = log_mel_spectrogram(sine(300, 5.0), {});
  CHECK(longer.valid_frames == 300);
}

TEST_CASE("log-mel errors") {
  CHECK_THROWS_AS(log_mel_spectrogram({{0.1, 0.2}, 8000}, {}), Error);
  CHECK_THROWS_AS(log_mel_spectrogram({{}, 16000}, {}), Error);
}

TEST_CASE("a 1 kHz tone peaks in the band centred nearest 1 kHz") {
  const FeatureConfig cfg;
  const auto spec = log_mel_spectrogram(sine(1000, 1.0), cfg);
  const auto& centers = MelFilterbank(cfg).center_hz();
  std::size_t nearest = 0;
  for (std::size_t m = 1; m < centers.size(); ++m) {
    if (std::abs(centers[m] - 1000) < std::abs(centers[nearest] - 1000)) nearest = m;
  }
  for (std::size_t f = 2; f + 2 < spec.valid_frames; ++f) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < spec.n_mels; ++m) {
      if (spec.at(f, m) > spec.at(f, best)) best = m;
    }
    CHECK(best == nearest);
  }
}

TEST_CASE("parallel, serial and reference log-mel agree") {
  nn::Rng rng(8);
  audio::AudioClip clip{{}, 16000};
  for (int i = 0; i < 12000; ++i) clip.samples.push_back(rng.uniform(-0.5, 0.5));
  const LogMelExtractor ex({});
  const auto par = ex.compute(clip);
  const auto ser = ex.compute_serial(clip);
  CHECK(par.values == ser.values);
  const auto ref = reference::log_mel(clip, {});
  REQUIRE(ref.values.size() == par.values.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.values.size(); ++i) worst = std::max(worst, std::abs(ref.values[i] - par.values[i]));
  CHECK(worst < 1e-9);
}

TEST_CASE("gain shifts log-mel by 2 ln c") {
  const auto a = log_mel_spectrogram(sine(700, 1.0, 0.1), {});
  const auto b = log_mel_spectrogram(sine(700, 1.0, 0.4), {});
  const double shift = 2 * std::log(4.0);
  for (std::size_t f = 0; f < a.valid_frames; ++f) {
    for (std::size_t m = 0; m < a.n_mels; ++m) {
      if (a.at(f, m) > std::log(1e-10) + 20) CHECK(std::abs(b.at(f, m) - a.at(f, m) - shift) < 1e-6);
    }
  }
}

TEST_CASE("normalization") {
  nn::Rng rng(2);
  std::vector<MelSpectrogram> set(4);
  for (auto& s : set) {
    s.frames = 5;
    s.n_mels = 3;
    s.valid_frames = 5;
    for (int i = 0; i < 15; ++i) s.values.push_back(i % 3 == 2 ? 7.0 : rng.uniform(-3, 3));
  }
  const auto stats = compute_feature_stats(set);
  CHECK(stats.stddev[2] == 1.0);
  std::vector<double> sum(3, 0.0), sq(3, 0.0);
  for (const auto& s : set) {
    const auto n = normalize_features(s, stats);
    for (std::size_t i = 0; i < n.values.size(); ++i) {
      sum[i % 3] += n.values[i];
      sq[i % 3] += n.values[i] * n.values[i];
    }
  }
  for (std::size_t b = 0; b < 2; ++b) {
    CHECK(std::abs(sum[b] / 20) < 1e-6);
    CHECK(std::abs(std::sqrt(sq[b] / 20) - 1.0) < 1e-6);
  }
  CHECK(sum[2] == 0.0);

  FeatureStats identity{{0, 0, 0}, {1, 1, 1}};
  CHECK(normalize_features(set[0], identity).values == set[0].values);
  FeatureStats wrong{{0}, {1}};
  CHECK_THROWS_AS(normalize_features(set[0], wrong), Error);
}

TEST_CASE("feature cache round trip") {
  const auto spec = log_mel_spectrogram(sine(440, 0.5), {});
  const auto path = std::filesystem::temp_directory_path() / "empath_cache_test.empf";
  write_feature_cache(path, spec);
  CHECK(std::filesystem::file_size(path) == 16 + 300 * 64 * 4);
  const auto back = read_feature_cache(path, {});
  REQUIRE(back.values.size() == spec.values.size());
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    CHECK(back.values[i] == static_cast<double>(static_cast<float>(spec.values[i])));
  }
  FeatureConfig other;
  other.n_mels = 40;
  CHECK_THROWS_AS(read_feature_cache(path, other), Error);
  std::filesystem::remove(path);
}
