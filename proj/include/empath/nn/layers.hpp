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
#include <span>
#include <vector>

#include "empath/nn/rng.hpp"
#include "empath/nn/tensor.hpp"

namespace empath::nn {

// ---------------------------------------------------------------------------
// 3x3 convolution, stride 1, zero padding 1. Input C_in x H x W, weights
// C_out x C_in x 3 x 3. Output channels are computed in parallel; each
// output element is produced by exactly one thread in a fixed order, so the
// result does not depend on the thread count.
// ---------------------------------------------------------------------------

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, std::span<const double> bias);

struct Conv2dGrads {
  Tensor input;  // empty when not requested
  Tensor weights;
  std::vector<double> bias;
};

Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weights,
                            bool need_input_grad = true);

// ---------------------------------------------------------------------------
// 2x2 max pooling with stride 2 over even spatial dims.
// ---------------------------------------------------------------------------

struct PoolResult {
  Tensor output;
  // Flat index into the input for each output element.
  std::vector<std::size_t> argmax;
};

PoolResult maxpool2d_forward(const Tensor& input);
Tensor maxpool2d_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                          const std::vector<std::size_t>& input_shape);

// Drops a trailing row and/or column so H and W are even.
Tensor crop_to_even(const Tensor& input);
// Adjoint of crop_to_even: zero-fills the dropped row/column.
Tensor uncrop(const Tensor& grad, const std::vector<std::size_t>& original_shape);

// Mean over the spatial grid of a C x H x W tensor.
std::vector<double> global_avg_pool(const Tensor& input);
Tensor global_avg_pool_backward(std::span<const double> grad, const std::vector<std::size_t>& shape);

// ---------------------------------------------------------------------------
// Dense, activations, loss.
// ---------------------------------------------------------------------------

std::vector<double> dense_forward(std::span<const double> input, const Tensor& weights,
                                  std::span<const double> bias);

struct DenseGrads {
  std::vector<double> input;
  Tensor weights;
  std::vector<double> bias;
};

DenseGrads dense_backward(std::span<const double> grad_out, std::span<const double> input,
                          const Tensor& weights);

void relu_inplace(std::span<double> x);
// Zeroes grad where the forward input was <= 0.
void relu_backward_inplace(std::span<double> grad, std::span<const double> forward_input);

std::vector<double> softmax(std::span<const double> logits);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

LossAndGrad softmax_cross_entropy(std::span<const double> logits, std::size_t label);

// Lowest index among equal maxima.
std::size_t argmax(std::span<const double> values);

// ---------------------------------------------------------------------------
// LSTM: gates stacked [input, forget, candidate, output] along the 4h axis.
// ---------------------------------------------------------------------------

struct LstmParams {
  Parameter input_weights;   // 4h x d
  Parameter hidden_weights;  // 4h x h
  Parameter bias;            // 4h

  LstmParams() = default;
  LstmParams(const std::string& prefix, std::size_t input_dim, std::size_t hidden);

  std::size_t input_dim() const { return input_weights.value.dim(1); }
  std::size_t hidden() const { return hidden_weights.value.dim(1); }
  ParameterRefs refs() { return {&input_weights, &hidden_weights, &bias}; }
};

struct LstmCache {
  std::size_t steps = 0;
  std::size_t hidden = 0;
  std::vector<double> inputs;  // T x d
  std::vector<double> gates;   // T x 4h, post-activation
  std::vector<double> cells;   // T x h
  std::vector<double> cell_tanh;
  std::vector<double> hiddens;  // T x h

  std::span<const double> final_hidden() const {
    return std::span<const double>(hiddens).subspan((steps - 1) * hidden, hidden);
  }
};

// Throws EmptySequence for zero steps.
LstmCache lstm_forward(const LstmParams& params, std::span<const double> inputs, std::size_t steps);

// Backpropagation through time. grad_hiddens is T x h (may be empty) and is
// added to grad_final on the last step. Accumulates into the parameter grads
// and returns the gradient with respect to the inputs (T x d).
std::vector<double> lstm_backward(LstmParams& params, const LstmCache& cache,
                                  std::span<const double> grad_final,
                                  std::span<const double> grad_hiddens = {});

// ---------------------------------------------------------------------------
// Embedding lookup. Index == rows is the reserved out-of-vocabulary slot and
// always yields a zero vector.
// ---------------------------------------------------------------------------

std::vector<double> embedding_lookup(const Tensor& table, std::span<const std::size_t> indices);

// Scatter-adds per-position gradients into grad_table (same shape as table).
void embedding_backward(Tensor& grad_table, std::span<const std::size_t> indices,
                        std::span<const double> grad_rows);

// ---------------------------------------------------------------------------
// Initialization.
// ---------------------------------------------------------------------------

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
void init_glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace empath::nn
