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
#include <functional>
#include <string>
#include <vector>

#include "empath/nn/tensor.hpp"

namespace empath::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moment buffers are bound to the parameter list
// given at construction; step() must always receive the same list.
class Adam {
 public:
  Adam(const ParameterRefs& params, AdamConfig config = {});

  void step(const ParameterRefs& params);

  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  // Measurements skipped because a perturbation crossed a ReLU kink or
  // changed a pooling argmax.
  std::size_t skipped_nonsmooth = 0;
  std::string worst_parameter;
};

struct GradCheckOptions {
  double eps = 1e-3;
  // Identifies the active piecewise-linear branch at the current parameters;
  // a measurement is skipped if either perturbed point lands on a different
  // branch. Leave empty for smooth models. It is called right after each
  // loss() evaluation at the same point, so it may return state recorded by
  // that call.
  std::function<std::uint64_t()> branch_signature;
  // When nonzero, at most this many evenly spaced entries of each parameter
  // are measured.
  std::size_t max_per_parameter = 0;
};

// Central-difference check of analytic gradients. `loss` evaluates the
// objective at the current parameter values; `backward` must leave the
// analytic gradient in each Parameter::grad (it is called once, after
// zeroing). Relative error is |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult gradient_check(const std::function<double()>& loss,
                               const std::function<void()>& backward,
                               const ParameterRefs& params, const GradCheckOptions& options = {});

double relative_error(double analytic, double numeric);

}  // namespace empath::nn
