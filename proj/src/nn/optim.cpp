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

#include "empath/nn/optim.hpp"

#include <algorithm>
#include <cmath>

#include "empath/error.hpp"

namespace empath::nn {

Adam::Adam(const ParameterRefs& params, AdamConfig config) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Parameter* p : params) {
    m_.push_back(Tensor::zeros_like(p->value));
    v_.push_back(Tensor::zeros_like(p->value));
  }
}

void Adam::step(const ParameterRefs& params) {
  if (params.size() != m_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer bound to a different parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.shape != m_[i].shape || params[i]->grad.shape != m_[i].shape) {
      throw Error(ErrorCode::ShapeMismatch, "parameter " + params[i]->name + " changed shape");
    }
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* theta = params[i]->value.data();
    const double* g = params[i]->grad.data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    const std::size_t n = m_[i].size();
    for (std::size_t k = 0; k < n; ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      theta[k] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult gradient_check(const std::function<double()>& loss,
                               const std::function<void()>& backward,
                               const ParameterRefs& params, const GradCheckOptions& options) {
  zero_grads(params);
  backward();
  const std::uint64_t base_branch = options.branch_signature ? options.branch_signature() : 0;

  GradCheckResult result;
  for (Parameter* p : params) {
    const std::size_t n = p->value.size();
    const std::size_t stride =
        options.max_per_parameter == 0 ? 1
                                       : std::max<std::size_t>(1, (n + options.max_per_parameter - 1) /
                                                                      options.max_per_parameter);
    for (std::size_t k = 0; k < n; k += stride) {
      double& theta = p->value.values[k];
      const double saved = theta;
      bool smooth = true;

      theta = saved + options.eps;
      const double up = loss();
      if (options.branch_signature && options.branch_signature() != base_branch) smooth = false;
      theta = saved - options.eps;
      const double down = loss();
      if (options.branch_signature && options.branch_signature() != base_branch) smooth = false;
      theta = saved;

      if (!smooth) {
        ++result.skipped_nonsmooth;
        continue;
      }
      const double numeric = (up - down) / (2.0 * options.eps);
      const double err = relative_error(p->grad.values[k], numeric);
      ++result.checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = p->name + "[" + std::to_string(k) + "]";
      }
    }
  }
  return result;
}

}  // namespace empath::nn
