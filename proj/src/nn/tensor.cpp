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

#include "empath/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "empath/error.hpp"

namespace empath::nn {

std::size_t shape_product(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(std::span<const std::size_t> shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : shape(std::move(dims)), values(shape_product(shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> data)
    : shape(std::move(dims)), values(std::move(data)) {
  if (shape_product(shape) != values.size()) {
    throw Error(ErrorCode::ShapeMismatch, "shape " + shape_string(shape) + " holds " +
                                              std::to_string(shape_product(shape)) +
                                              " values, got " + std::to_string(values.size()));
  }
}

void Tensor::fill(double v) { std::fill(values.begin(), values.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void require_shape(const Tensor& t, std::initializer_list<std::size_t> expected,
                   const char* what) {
  if (!std::equal(t.shape.begin(), t.shape.end(), expected.begin(), expected.end())) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + ": expected " +
                    shape_string(std::span<const std::size_t>(expected.begin(), expected.size())) +
                    ", got " + shape_string(t.shape));
  }
}

void zero_grads(const ParameterRefs& params) {
  for (Parameter* p : params) p->zero_grad();
}

std::size_t parameter_count(const ParameterRefs& params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += p->value.size();
  return n;
}

}  // namespace empath::nn
