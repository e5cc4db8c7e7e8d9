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

#include <cstddef>
#include <cstdint>
#include <vector>

namespace empath {

// Shared by the SER and recommender trainers.
struct TrainConfig {
  int epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool shuffle = true;

  // Throws InvalidConfig.
  void validate() const;
};

struct EpochStats {
  double loss = 0.0;
  // Running accuracy over the forward passes made during the epoch.
  double accuracy = 0.0;

  bool operator==(const EpochStats&) const = default;
};

struct TrainReport {
  std::vector<EpochStats> epochs;

  double final_accuracy() const { return epochs.empty() ? 0.0 : epochs.back().accuracy; }
  bool operator==(const TrainReport&) const = default;
};

}  // namespace empath
