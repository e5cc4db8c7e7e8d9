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

#include "empath/training.hpp"

#include "empath/error.hpp"

namespace empath {

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning rate must be > 0");
}

}  // namespace empath
