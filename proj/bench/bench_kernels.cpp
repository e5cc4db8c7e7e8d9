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

// Parallel kernels against their serial counterparts.
#include <benchmark/benchmark.h>

#include <omp.h>

#include "empath/dsp_features.hpp"
#include "empath/nn/layers.hpp"
#include "empath/nn/rng.hpp"
#include "reference.hpp"

using namespace empath;

namespace {

nn::Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
  nn::Tensor t(std::move(shape));
  nn::Rng rng(seed);
  for (double& v : t.values) v = rng.uniform(-1.0, 1.0);
  return t;
}

// Second SER stage at the default input size: 16 -> 32 channels on 150x32.
struct ConvCase {
  nn::Tensor input = random_tensor({16, 150, 32}, 1);
  nn::Tensor weights = random_tensor({32, 16, 3, 3}, 2);
  std::vector<double> bias = std::vector<double>(32, 0.1);
};

void BM_Conv2dReference(benchmark::State& state) {
  ConvCase c;
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d(c.input, c.weights, c.bias));
}

void BM_Conv2dOpenMP(benchmark::State& state) {
  ConvCase c;
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_forward(c.input, c.weights, c.bias));
}

void BM_Conv2dBackwardOpenMP(benchmark::State& state) {
  ConvCase c;
  const nn::Tensor grad = random_tensor({32, 150, 32}, 3);
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_backward(grad, c.input, c.weights));
}

void BM_Conv2dBackwardReference(benchmark::State& state) {
  ConvCase c;
  const nn::Tensor grad = random_tensor({32, 150, 32}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d_backward(grad, c.input, c.weights));
}

audio::AudioClip three_seconds() {
  audio::AudioClip clip;
  nn::Rng rng(4);
  clip.samples.resize(48000);
  for (double& s : clip.samples) s = rng.uniform(-0.5, 0.5);
  return clip;
}

void BM_LogMelSerial(benchmark::State& state) {
  const dsp::LogMelExtractor extractor{dsp::FeatureConfig{}};
  const auto clip = three_seconds();
  for (auto _ : state) benchmark::DoNotOptimize(extractor.compute_serial(clip));
}

void BM_LogMelOpenMP(benchmark::State& state) {
  const dsp::LogMelExtractor extractor{dsp::FeatureConfig{}};
  const auto clip = three_seconds();
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(extractor.compute(clip));
}

void BM_LogMelNaiveDft(benchmark::State& state) {
  const auto clip = three_seconds();
  for (auto _ : state) benchmark::DoNotOptimize(reference::log_mel(clip, dsp::FeatureConfig{}));
}

void thread_counts(benchmark::internal::Benchmark* b) {
  const int max = omp_get_num_procs();
  for (int t = 1; t <= max; t *= 2) b->Arg(t);
  if ((max & (max - 1)) != 0) b->Arg(max);
}

}  // namespace

BENCHMARK(BM_Conv2dReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2dOpenMP)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Conv2dBackwardReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2dBackwardOpenMP)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_LogMelSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LogMelOpenMP)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_LogMelNaiveDft)->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
