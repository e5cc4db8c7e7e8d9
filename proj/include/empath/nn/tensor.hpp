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
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace empath::nn {

// Row-major dense buffer with an explicit shape.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
  Tensor(std::vector<std::size_t> dims, std::vector<double> data);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape); }

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape[i]; }

  double* data() { return values.data(); }
  const double* data() const { return values.data(); }
  std::span<double> span() { return values; }
  std::span<const double> span() const { return values; }

  void fill(double v);
  bool all_finite() const;

  bool operator==(const Tensor&) const = default;
};

std::size_t shape_product(std::span<const std::size_t> shape);
std::string shape_string(std::span<const std::size_t> shape);

// Throws ShapeMismatch with a message naming `what` when shapes differ.
void require_shape(const Tensor& t, std::initializer_list<std::size_t> expected,
                   const char* what);

// A trainable tensor and its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, std::vector<std::size_t> shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}

  void zero_grad() { grad.fill(0.0); }
};

using ParameterRefs = std::vector<Parameter*>;

void zero_grads(const ParameterRefs& params);
std::size_t parameter_count(const ParameterRefs& params);

}  // namespace empath::nn
