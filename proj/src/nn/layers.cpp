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

#include "empath/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "empath/error.hpp"

namespace empath::nn {

namespace {

struct Range {
  std::size_t begin;
  std::size_t end;
};

// Output positions o for which o + offset lies inside [0, n), offset in {-1,0,1}.
Range valid_range(std::size_t n, int offset) {
  if (offset < 0) return {1, n};
  if (offset > 0) return {0, n - 1};
  return {0, n};
}

void check_conv_shapes(const Tensor& input, const Tensor& weights) {
  if (input.rank() != 3) {
    throw Error(ErrorCode::ShapeMismatch, "conv2d input must be C x H x W, got " +
                                              shape_string(input.shape));
  }
  if (weights.rank() != 4 || weights.dim(1) != input.dim(0) || weights.dim(2) != 3 ||
      weights.dim(3) != 3) {
    throw Error(ErrorCode::ShapeMismatch, "conv2d weights " + shape_string(weights.shape) +
                                              " incompatible with input " +
                                              shape_string(input.shape));
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, std::span<const double> bias) {
  check_conv_shapes(input, weights);
  const std::size_t c_in = input.dim(0);
  const std::size_t h = input.dim(1);
  const std::size_t w = input.dim(2);
  const std::size_t c_out = weights.dim(0);
  if (bias.size() != c_out) {
    throw Error(ErrorCode::ShapeMismatch, "conv2d bias length " + std::to_string(bias.size()) +
                                              " != " + std::to_string(c_out));
  }
  Tensor out({c_out, h, w});
  const double* in = input.data();
  const double* wt = weights.data();
  double* o = out.data();
  const std::size_t plane = h * w;

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t co_i = 0; co_i < static_cast<std::ptrdiff_t>(c_out); ++co_i) {
    const auto co = static_cast<std::size_t>(co_i);
    double* out_plane = o + co * plane;
    std::fill(out_plane, out_plane + plane, bias[co]);
    for (std::size_t y = 0; y < h; ++y) {
      double* out_row = out_plane + y * w;
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const double* k = wt + (co * c_in + ci) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          const long sy = static_cast<long>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          const double* in_row = in + ci * plane + static_cast<std::size_t>(sy) * w;
          for (int kx = 0; kx < 3; ++kx) {
            const double kv = k[ky * 3 + kx];
            const Range xr = valid_range(w, kx - 1);
            const double* src = in_row + xr.begin + kx - 1;
            double* dst = out_row + xr.begin;
            const std::size_t len = xr.end - xr.begin;
            for (std::size_t i = 0; i < len; ++i) dst[i] += kv * src[i];
          }
        }
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weights,
                            bool need_input_grad) {
  check_conv_shapes(input, weights);
  const std::size_t c_in = input.dim(0);
  const std::size_t h = input.dim(1);
  const std::size_t w = input.dim(2);
  const std::size_t c_out = weights.dim(0);
  require_shape(grad_out, {c_out, h, w}, "conv2d grad_out");
  const std::size_t plane = h * w;

  Conv2dGrads g;
  g.weights = Tensor::zeros_like(weights);
  g.bias.assign(c_out, 0.0);
  const double* go = grad_out.data();
  const double* in = input.data();
  const double* wt = weights.data();
  double* gw = g.weights.data();

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t co_i = 0; co_i < static_cast<std::ptrdiff_t>(c_out); ++co_i) {
    const auto co = static_cast<std::size_t>(co_i);
    const double* g_plane = go + co * plane;
    double bsum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) bsum += g_plane[i];
    g.bias[co] = bsum;
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const double* in_plane = in + ci * plane;
      for (int ky = 0; ky < 3; ++ky) {
        const Range yr = valid_range(h, ky - 1);
        for (int kx = 0; kx < 3; ++kx) {
          const Range xr = valid_range(w, kx - 1);
          // Four independent partial sums per row keep the reduction off the
          // add-latency chain; the order is fixed, so results stay reproducible.
          double acc[4] = {0.0, 0.0, 0.0, 0.0};
          const std::size_t len = xr.end - xr.begin;
          for (std::size_t y = yr.begin; y < yr.end; ++y) {
            const double* g_row = g_plane + y * w + xr.begin;
            const double* in_row = in_plane + (y + ky - 1) * w + xr.begin + kx - 1;
            std::size_t i = 0;
            for (; i + 4 <= len; i += 4) {
              acc[0] += g_row[i] * in_row[i];
              acc[1] += g_row[i + 1] * in_row[i + 1];
              acc[2] += g_row[i + 2] * in_row[i + 2];
              acc[3] += g_row[i + 3] * in_row[i + 3];
            }
            for (; i < len; ++i) acc[i % 4] += g_row[i] * in_row[i];
          }
          gw[(co * c_in + ci) * 9 + ky * 3 + kx] = (acc[0] + acc[1]) + (acc[2] + acc[3]);
        }
      }
    }
  }

  if (need_input_grad) {
    g.input = Tensor::zeros_like(input);
    double* gi = g.input.data();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ci_i = 0; ci_i < static_cast<std::ptrdiff_t>(c_in); ++ci_i) {
      const auto ci = static_cast<std::size_t>(ci_i);
      double* gi_plane = gi + ci * plane;
      for (std::size_t co = 0; co < c_out; ++co) {
        const double* g_plane = go + co * plane;
        const double* k = wt + (co * c_in + ci) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          const Range yr = valid_range(h, ky - 1);
          for (std::size_t y = yr.begin; y < yr.end; ++y) {
            const double* g_row = g_plane + y * w;
            double* dst_row = gi_plane + (y + ky - 1) * w;
            for (int kx = 0; kx < 3; ++kx) {
              const double kv = k[ky * 3 + kx];
              const Range xr = valid_range(w, kx - 1);
              double* dst = dst_row + xr.begin + kx - 1;
              const double* src = g_row + xr.begin;
              const std::size_t len = xr.end - xr.begin;
              for (std::size_t i = 0; i < len; ++i) dst[i] += kv * src[i];
            }
          }
        }
      }
    }
  }
  return g;
}

PoolResult maxpool2d_forward(const Tensor& input) {
  if (input.rank() != 3) {
    throw Error(ErrorCode::ShapeMismatch, "maxpool input must be C x H x W");
  }
  const std::size_t c = input.dim(0);
  const std::size_t h = input.dim(1);
  const std::size_t w = input.dim(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw Error(ErrorCode::OddSpatialDim, "maxpool needs even H and W, got " +
                                              shape_string(input.shape));
  }
  const std::size_t oh = h / 2;
  const std::size_t ow = w / 2;
  PoolResult r{Tensor({c, oh, ow}), std::vector<std::size_t>(c * oh * ow)};
  const double* in = input.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        // Window scanned in ascending flat index; strict > keeps the first max.
        const std::size_t base = ch * h * w + (2 * y) * w + 2 * x;
        const std::size_t candidates[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = candidates[0];
        for (int i = 1; i < 4; ++i) {
          if (in[candidates[i]] > in[best]) best = candidates[i];
        }
        const std::size_t o = (ch * oh + y) * ow + x;
        r.output.values[o] = in[best];
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

Tensor maxpool2d_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                          const std::vector<std::size_t>& input_shape) {
  if (grad_out.size() != argmax.size()) {
    throw Error(ErrorCode::ShapeMismatch, "maxpool grad does not match argmax table");
  }
  Tensor g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g.values[argmax[i]] += grad_out.values[i];
  return g;
}

Tensor crop_to_even(const Tensor& input) {
  const std::size_t c = input.dim(0);
  const std::size_t h = input.dim(1);
  const std::size_t w = input.dim(2);
  const std::size_t eh = h - h % 2;
  const std::size_t ew = w - w % 2;
  if (eh == h && ew == w) return input;
  Tensor out({c, eh, ew});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < eh; ++y) {
      const double* src = input.data() + (ch * h + y) * w;
      std::copy(src, src + ew, out.data() + (ch * eh + y) * ew);
    }
  }
  return out;
}

Tensor uncrop(const Tensor& grad, const std::vector<std::size_t>& original_shape) {
  if (grad.shape == original_shape) return grad;
  const std::size_t c = original_shape[0];
  const std::size_t h = original_shape[1];
  const std::size_t w = original_shape[2];
  const std::size_t eh = grad.dim(1);
  const std::size_t ew = grad.dim(2);
  Tensor out(original_shape);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < eh; ++y) {
      const double* src = grad.data() + (ch * eh + y) * ew;
      std::copy(src, src + ew, out.data() + (ch * h + y) * w);
    }
  }
  return out;
}

std::vector<double> global_avg_pool(const Tensor& input) {
  const std::size_t c = input.dim(0);
  const std::size_t plane = input.dim(1) * input.dim(2);
  std::vector<double> out(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += input.values[ch * plane + i];
    out[ch] = acc / static_cast<double>(plane);
  }
  return out;
}

Tensor global_avg_pool_backward(std::span<const double> grad,
                                const std::vector<std::size_t>& shape) {
  Tensor g(shape);
  const std::size_t plane = shape[1] * shape[2];
  for (std::size_t ch = 0; ch < shape[0]; ++ch) {
    const double v = grad[ch] / static_cast<double>(plane);
    std::fill(g.values.begin() + static_cast<std::ptrdiff_t>(ch * plane),
              g.values.begin() + static_cast<std::ptrdiff_t>((ch + 1) * plane), v);
  }
  return g;
}

std::vector<double> dense_forward(std::span<const double> input, const Tensor& weights,
                                  std::span<const double> bias) {
  if (weights.rank() != 2 || weights.dim(1) != input.size() || bias.size() != weights.dim(0)) {
    throw Error(ErrorCode::ShapeMismatch, "dense weights " + shape_string(weights.shape) +
                                              " vs input " + std::to_string(input.size()) +
                                              ", bias " + std::to_string(bias.size()));
  }
  const std::size_t m = weights.dim(0);
  const std::size_t n = weights.dim(1);
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = bias[i];
    const double* row = weights.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * input[j];
    out[i] = acc;
  }
  return out;
}

DenseGrads dense_backward(std::span<const double> grad_out, std::span<const double> input,
                          const Tensor& weights) {
  if (weights.rank() != 2 || weights.dim(0) != grad_out.size() ||
      weights.dim(1) != input.size()) {
    throw Error(ErrorCode::ShapeMismatch, "dense backward shapes inconsistent");
  }
  const std::size_t m = weights.dim(0);
  const std::size_t n = weights.dim(1);
  DenseGrads g{std::vector<double>(n, 0.0), Tensor({m, n}),
               std::vector<double>(grad_out.begin(), grad_out.end())};
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = weights.data() + i * n;
    double* grow = g.weights.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      grow[j] = grad_out[i] * input[j];
      g.input[j] += row[j] * grad_out[i];
    }
  }
  return g;
}

void relu_inplace(std::span<double> x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(std::span<double> grad, std::span<const double> forward_input) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(forward_input[i] > 0.0)) grad[i] = 0.0;
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

LossAndGrad softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(label) + " with " +
                                                std::to_string(logits.size()) + " classes");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  const double log_sum = std::log(sum);
  LossAndGrad r;
  r.loss = -(logits[label] - mx - log_sum);
  r.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    r.grad[i] = std::exp(logits[i] - mx - log_sum) - (i == label ? 1.0 : 0.0);
  }
  return r;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

LstmParams::LstmParams(const std::string& prefix, std::size_t input_dim, std::size_t hidden)
    : input_weights(prefix + ".input_weights", {4 * hidden, input_dim}),
      hidden_weights(prefix + ".hidden_weights", {4 * hidden, hidden}),
      bias(prefix + ".bias", {4 * hidden}) {}

LstmCache lstm_forward(const LstmParams& params, std::span<const double> inputs,
                       std::size_t steps) {
  if (steps == 0) throw Error(ErrorCode::EmptySequence, "LSTM needs at least one step");
  const std::size_t d = params.input_dim();
  const std::size_t h = params.hidden();
  if (inputs.size() != steps * d) {
    throw Error(ErrorCode::ShapeMismatch, "LSTM input length " + std::to_string(inputs.size()) +
                                              " != steps x " + std::to_string(d));
  }
  LstmCache c;
  c.steps = steps;
  c.hidden = h;
  c.inputs.assign(inputs.begin(), inputs.end());
  c.gates.resize(steps * 4 * h);
  c.cells.resize(steps * h);
  c.cell_tanh.resize(steps * h);
  c.hiddens.resize(steps * h);

  const double* wx = params.input_weights.value.data();
  const double* wh = params.hidden_weights.value.data();
  const double* b = params.bias.value.data();
  std::vector<double> h_prev(h, 0.0);
  std::vector<double> c_prev(h, 0.0);
  std::vector<double> pre(4 * h);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* x = inputs.data() + t * d;
    for (std::size_t r = 0; r < 4 * h; ++r) {
      double acc = b[r];
      const double* wxr = wx + r * d;
      for (std::size_t j = 0; j < d; ++j) acc += wxr[j] * x[j];
      const double* whr = wh + r * h;
      for (std::size_t j = 0; j < h; ++j) acc += whr[j] * h_prev[j];
      pre[r] = acc;
    }
    double* gate = c.gates.data() + t * 4 * h;
    for (std::size_t k = 0; k < h; ++k) {
      const double ig = sigmoid(pre[k]);
      const double fg = sigmoid(pre[h + k]);
      const double cand = std::tanh(pre[2 * h + k]);
      const double og = sigmoid(pre[3 * h + k]);
      gate[k] = ig;
      gate[h + k] = fg;
      gate[2 * h + k] = cand;
      gate[3 * h + k] = og;
      const double cell = fg * c_prev[k] + ig * cand;
      const double ct = std::tanh(cell);
      c.cells[t * h + k] = cell;
      c.cell_tanh[t * h + k] = ct;
      c.hiddens[t * h + k] = og * ct;
    }
    std::copy_n(c.hiddens.begin() + static_cast<std::ptrdiff_t>(t * h), h, h_prev.begin());
    std::copy_n(c.cells.begin() + static_cast<std::ptrdiff_t>(t * h), h, c_prev.begin());
  }
  return c;
}

std::vector<double> lstm_backward(LstmParams& params, const LstmCache& cache,
                                  std::span<const double> grad_final,
                                  std::span<const double> grad_hiddens) {
  const std::size_t d = params.input_dim();
  const std::size_t h = params.hidden();
  const std::size_t steps = cache.steps;
  if (grad_final.size() != h || (!grad_hiddens.empty() && grad_hiddens.size() != steps * h)) {
    throw Error(ErrorCode::ShapeMismatch, "LSTM upstream gradient has the wrong length");
  }
  const double* wx = params.input_weights.value.data();
  const double* wh = params.hidden_weights.value.data();
  double* gwx = params.input_weights.grad.data();
  double* gwh = params.hidden_weights.grad.data();
  double* gb = params.bias.grad.data();

  std::vector<double> grad_inputs(steps * d, 0.0);
  std::vector<double> dh(h, 0.0);
  std::vector<double> dc(h, 0.0);
  std::vector<double> dpre(4 * h);
  for (std::size_t step = steps; step-- > 0;) {
    if (!grad_hiddens.empty()) {
      for (std::size_t k = 0; k < h; ++k) dh[k] += grad_hiddens[step * h + k];
    }
    if (step == steps - 1) {
      for (std::size_t k = 0; k < h; ++k) dh[k] += grad_final[k];
    }
    const double* gate = cache.gates.data() + step * 4 * h;
    for (std::size_t k = 0; k < h; ++k) {
      const double ig = gate[k];
      const double fg = gate[h + k];
      const double cand = gate[2 * h + k];
      const double og = gate[3 * h + k];
      const double ct = cache.cell_tanh[step * h + k];
      const double c_prev = step > 0 ? cache.cells[(step - 1) * h + k] : 0.0;
      const double dcell = dc[k] + dh[k] * og * (1.0 - ct * ct);
      dpre[k] = dcell * cand * ig * (1.0 - ig);
      dpre[h + k] = dcell * c_prev * fg * (1.0 - fg);
      dpre[2 * h + k] = dcell * ig * (1.0 - cand * cand);
      dpre[3 * h + k] = dh[k] * ct * og * (1.0 - og);
      dc[k] = dcell * fg;
    }
    const double* x = cache.inputs.data() + step * d;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t r = 0; r < 4 * h; ++r) {
      const double g = dpre[r];
      gb[r] += g;
      double* gwxr = gwx + r * d;
      const double* wxr = wx + r * d;
      for (std::size_t j = 0; j < d; ++j) {
        gwxr[j] += g * x[j];
        grad_inputs[step * d + j] += g * wxr[j];
      }
      if (step > 0) {
        const double* hp = cache.hiddens.data() + (step - 1) * h;
        double* gwhr = gwh + r * h;
        const double* whr = wh + r * h;
        for (std::size_t j = 0; j < h; ++j) {
          gwhr[j] += g * hp[j];
          dh[j] += g * whr[j];
        }
      }
    }
  }
  return grad_inputs;
}

std::vector<double> embedding_lookup(const Tensor& table, std::span<const std::size_t> indices) {
  const std::size_t rows = table.dim(0);
  const std::size_t d = table.dim(1);
  std::vector<double> out(indices.size() * d, 0.0);
  for (std::size_t t = 0; t < indices.size(); ++t) {
    const std::size_t idx = indices[t];
    if (idx > rows) {
      throw Error(ErrorCode::IndexOutOfRange, "token index " + std::to_string(idx) +
                                                  " exceeds vocabulary " + std::to_string(rows));
    }
    if (idx == rows) continue;
    std::copy_n(table.data() + idx * d, d, out.data() + t * d);
  }
  return out;
}

void embedding_backward(Tensor& grad_table, std::span<const std::size_t> indices,
                        std::span<const double> grad_rows) {
  const std::size_t rows = grad_table.dim(0);
  const std::size_t d = grad_table.dim(1);
  if (grad_rows.size() != indices.size() * d) {
    throw Error(ErrorCode::ShapeMismatch, "embedding grad rows do not match indices");
  }
  for (std::size_t t = 0; t < indices.size(); ++t) {
    const std::size_t idx = indices[t];
    if (idx > rows) {
      throw Error(ErrorCode::IndexOutOfRange, "token index " + std::to_string(idx));
    }
    if (idx == rows) continue;
    for (std::size_t j = 0; j < d; ++j) grad_table.values[idx * d + j] += grad_rows[t * d + j];
  }
}

void init_glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.values) v = rng.uniform(-limit, limit);
}

}  // namespace empath::nn
