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
#include <span>
#include <vector>

namespace empath::audio {

// Mono PCM audio. Samples are nominally in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

// Decodes a RIFF/WAVE PCM 16-bit container with one or two channels. Stereo
// is downmixed by the per-frame mean. Unknown chunks are skipped.
// Throws MalformedContainer or UnsupportedEncoding.
AudioClip read_wav(std::span<const std::uint8_t> bytes);

// Encodes a clip as 16-bit mono PCM. Samples are clamped to [-1, 1].
std::vector<std::uint8_t> write_wav(const AudioClip& clip);

// Linear interpolation resampler; the final source sample is held past the
// end. Throws EmptyClip for zero samples, InvalidConfig for target_rate <= 0.
AudioClip resample_linear(const AudioClip& clip, int target_rate);

// Quantization helpers shared by the codec and its tests.
std::int16_t encode_sample(double x);
double decode_sample(std::int16_t v);

}  // namespace empath::audio
