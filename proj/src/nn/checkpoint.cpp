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

#include "empath/nn/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "empath/error.hpp"

namespace empath::nn {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::MalformedCheckpoint, "truncated at byte " + std::to_string(pos_));
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw Error(ErrorCode::MalformedCheckpoint, "missing tensor '" + name + "'");
}

const std::string& Checkpoint::string(const std::string& key) const {
  const auto it = strings.find(key);
  if (it == strings.end()) {
    throw Error(ErrorCode::MalformedCheckpoint, "missing string entry '" + key + "'");
  }
  return it->second;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.raw("EMPC", 4);
  w.u32(Checkpoint::kVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.kind));
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.values) w.f64(v);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.strings.size()));
  for (const auto& [k, v] : ckpt.strings) {
    w.str(k);
    w.str(v);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::string(reinterpret_cast<const char*>(bytes.data()), 4) != "EMPC") {
    throw Error(ErrorCode::MalformedCheckpoint, "bad magic");
  }
  Reader r(bytes.subspan(4));
  const std::uint32_t version = r.u32();
  if (version != Checkpoint::kVersion) {
    throw Error(ErrorCode::MalformedCheckpoint, "unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const std::uint32_t kind = r.u32();
  if (kind != static_cast<std::uint32_t>(ModelKind::Ser) &&
      kind != static_cast<std::uint32_t>(ModelKind::Rec)) {
    throw Error(ErrorCode::MalformedCheckpoint, "unknown model kind " + std::to_string(kind));
  }
  ckpt.kind = static_cast<ModelKind>(kind);
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = r.u32();
    Tensor t(shape);
    for (double& v : t.values) v = r.f64();
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  const std::uint32_t n_strings = r.u32();
  for (std::uint32_t i = 0; i < n_strings; ++i) {
    std::string k = r.str();
    ckpt.strings[std::move(k)] = r.str();
  }
  if (!r.at_end()) throw Error(ErrorCode::MalformedCheckpoint, "trailing bytes");
  return ckpt;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file_bytes(path));
}

}  // namespace empath::nn
