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

#include "empath/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <optional>
#include <string>

#include "empath/error.hpp"

namespace empath::audio {

namespace {

constexpr double kDecodeScale = 32768.0;

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) |
         (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

}  // namespace

std::int16_t encode_sample(double x) {
  if (std::isnan(x)) return 0;
  const double clamped = std::clamp(x, -1.0, 1.0);
  const long v = std::lround(clamped * kDecodeScale);
  return static_cast<std::int16_t>(std::clamp(v, -32768L, 32767L));
}

double decode_sample(std::int16_t v) { return static_cast<double>(v) / kDecodeScale; }

AudioClip read_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) {
    throw Error(ErrorCode::MalformedContainer, "missing RIFF/WAVE magic");
  }
  const std::uint64_t riff_size = read_u32(bytes, 4);
  if (riff_size + 8 > bytes.size() || riff_size < 4) {
    throw Error(ErrorCode::MalformedContainer, "RIFF size exceeds buffer");
  }
  const std::size_t end = static_cast<std::size_t>(riff_size + 8);

  std::optional<FmtChunk> fmt;
  std::optional<std::span<const std::uint8_t>> data;
  std::size_t pos = 12;
  while (pos + 8 <= end) {
    const std::uint64_t size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > end) {
      throw Error(ErrorCode::MalformedContainer, "chunk size exceeds container");
    }
    if (tag_is(bytes, pos, "fmt ")) {
      if (size < 16) throw Error(ErrorCode::MalformedContainer, "fmt chunk too short");
      FmtChunk f;
      f.format = read_u16(bytes, body);
      f.channels = read_u16(bytes, body + 2);
      f.sample_rate = read_u32(bytes, body + 4);
      f.bits = read_u16(bytes, body + 14);
      fmt = f;
    } else if (tag_is(bytes, pos, "data")) {
      data = bytes.subspan(body, static_cast<std::size_t>(size));
    }
    pos = body + static_cast<std::size_t>(size) + (size & 1U);
  }
  if (!fmt) throw Error(ErrorCode::MalformedContainer, "missing fmt chunk");
  if (!data) throw Error(ErrorCode::MalformedContainer, "missing data chunk");
  if (fmt->format != 1) {
    throw Error(ErrorCode::UnsupportedEncoding,
                "format tag " + std::to_string(fmt->format) + " is not PCM");
  }
  if (fmt->bits != 16) {
    throw Error(ErrorCode::UnsupportedEncoding,
                "bit depth " + std::to_string(fmt->bits) + " is not 16");
  }
  if (fmt->channels != 1 && fmt->channels != 2) {
    throw Error(ErrorCode::UnsupportedEncoding,
                std::to_string(fmt->channels) + " channels");
  }
  if (fmt->sample_rate == 0) {
    throw Error(ErrorCode::MalformedContainer, "zero sample rate");
  }
  const std::size_t frame_bytes = 2U * fmt->channels;
  if (data->size() % frame_bytes != 0) {
    throw Error(ErrorCode::MalformedContainer, "data chunk holds a partial frame");
  }

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt->sample_rate);
  const std::size_t frames = data->size() / frame_bytes;
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const auto left = static_cast<std::int16_t>(read_u16(*data, i * frame_bytes));
    if (fmt->channels == 1) {
      clip.samples[i] = decode_sample(left);
    } else {
      const auto right = static_cast<std::int16_t>(read_u16(*data, i * frame_bytes + 2));
      clip.samples[i] = (static_cast<double>(left) + static_cast<double>(right)) / 2.0 /
                        kDecodeScale;
    }
  }
  return clip;
}

std::vector<std::uint8_t> write_wav(const AudioClip& clip) {
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : clip.samples) {
    put_u16(out, static_cast<std::uint16_t>(encode_sample(s)));
  }
  return out;
}

AudioClip resample_linear(const AudioClip& clip, int target_rate) {
  if (clip.samples.empty()) throw Error(ErrorCode::EmptyClip, "cannot resample an empty clip");
  if (target_rate <= 0 || clip.sample_rate <= 0) {
    throw Error(ErrorCode::InvalidConfig, "sample rates must be positive");
  }
  if (target_rate == clip.sample_rate) return clip;

  const auto n = static_cast<std::uint64_t>(clip.samples.size());
  const auto src = static_cast<std::uint64_t>(clip.sample_rate);
  const auto dst = static_cast<std::uint64_t>(target_rate);
  const std::uint64_t out_len = n * dst / src;

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  for (std::uint64_t j = 0; j < out_len; ++j) {
    // Source position j*src/dst split into integer index and exact fraction.
    const std::uint64_t num = j * src;
    const std::uint64_t i = num / dst;
    const double frac = static_cast<double>(num % dst) / static_cast<double>(dst);
    const double a = clip.samples[i];
    out.samples[j] = (i + 1 < n) ? a + frac * (clip.samples[i + 1] - a) : a;
  }
  return out;
}

}  // namespace empath::audio
