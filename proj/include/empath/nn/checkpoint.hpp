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
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "empath/nn/tensor.hpp"

namespace empath::nn {

enum class ModelKind : std::uint32_t { Ser = 1, Rec = 2 };

// Binary layout, all integers u32 little-endian:
//   "EMPC" | version | kind | record count
//   per record: name length | name (UTF-8) | rank | dims... | f64 LE values
//   string-table count | per entry: key length | key | value length | value
// The string table carries non-numeric state such as a vocabulary.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelKind kind = ModelKind::Ser;
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::map<std::string, std::string> strings;

  void add(std::string name, Tensor t) { tensors.emplace_back(std::move(name), std::move(t)); }
  // Throws MalformedCheckpoint when absent.
  const Tensor& tensor(const std::string& name) const;
  const std::string& string(const std::string& key) const;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace empath::nn
