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

#include <doctest.h>

#include <cmath>
#include <numeric>

#include <omp.h>

#include "empath/error.hpp"
#include "empath/nn/checkpoint.hpp"
#include "empath/nn/layers.hpp"
#include "empath/nn/optim.hpp"
#include "empath/nn/rng.hpp"
#include "empath/nn/tensor.hpp"
#include "gradcheck_cases.hpp"
#include "reference.hpp"

using namespace empath;
using namespace empath::nn;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values) v = rng.uniform(-scale, scale);
  return t;
}

std::vector<double> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.all_finite());
  t.values[4] = std::nan("");
  CHECK_FALSE(t.all_finite());
  CHECK(code_of([] { Tensor({2, 2}, std::vector<double>{1, 2, 3}); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { require_shape(t, {3, 2}, "t"); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("conv2d identity kernel") {
  Rng rng(1);
  Tensor x = random_tensor({1, 5, 4}, rng);
  Tensor w({1, 1, 3, 3});
  w.values[4] = 1.0;
  const std::vector<double> b{0.0};
  CHECK(conv2d_forward(x, w, b) == x);
}

TEST_CASE("conv2d all-ones kernel on constant input") {
  Tensor x({1, 4, 4}, 1.0);
  Tensor w({1, 1, 3, 3}, 1.0);
  const std::vector<double> b{0.0};
  Tensor y = conv2d_forward(x, w, b);
  CHECK(y.values[1 * 4 + 1] == 9.0);
  CHECK(y.values[2 * 4 + 2] == 9.0);
  CHECK(y.values[0] == 4.0);  // corner sees four ones
  CHECK(y.values[1] == 6.0);  // edge sees six
}

TEST_CASE("conv2d matches the naive oracle") {
  Rng rng(2);
  Tensor x = random_tensor({2, 4, 4}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  const auto b = random_vector(3, rng);
  Tensor fast = conv2d_forward(x, w, b);
  Tensor slow = reference::conv2d(x, w, b);
  CHECK(fast.shape == slow.shape);
  CHECK(max_abs_diff(fast.values, slow.values) < 1e-9);

  Tensor g = random_tensor({3, 4, 4}, rng);
  auto fg = conv2d_backward(g, x, w);
  auto sg = reference::conv2d_backward(g, x, w);
  CHECK(max_abs_diff(fg.input.values, sg.input.values) < 1e-9);
  CHECK(max_abs_diff(fg.weights.values, sg.weights.values) < 1e-9);
  CHECK(max_abs_diff(fg.bias, sg.bias) < 1e-9);
}

TEST_CASE("conv2d backward trivial cases") {
  Rng rng(3);
  Tensor x = random_tensor({2, 4, 5}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  auto zero = conv2d_backward(Tensor({3, 4, 5}), x, w);
  for (double v : zero.input.values) CHECK(v == 0.0);
  for (double v : zero.weights.values) CHECK(v == 0.0);
  for (double v : zero.bias) CHECK(v == 0.0);

  Tensor g = random_tensor({3, 4, 5}, rng);
  auto grads = conv2d_backward(g, x, w);
  for (std::size_t c = 0; c < 3; ++c) {
    const double sum = std::accumulate(g.values.begin() + c * 20, g.values.begin() + (c + 1) * 20, 0.0);
    CHECK(grads.bias[c] == doctest::Approx(sum).epsilon(1e-12));
  }
  CHECK(conv2d_backward(g, x, w, false).input.size() == 0);
}

TEST_CASE("conv2d shape errors") {
  Tensor x({2, 4, 4});
  Tensor w({3, 1, 3, 3});
  const std::vector<double> b(3);
  CHECK(code_of([&] { conv2d_forward(x, w, b); }) == ErrorCode::ShapeMismatch);
  Tensor w5({3, 2, 5, 5});
  CHECK(code_of([&] { conv2d_forward(x, w5, b); }) == ErrorCode::ShapeMismatch);
  Tensor w2({3, 2, 3, 3});
  const std::vector<double> b2(2);
  CHECK(code_of([&] { conv2d_forward(x, w2, b2); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { conv2d_backward(Tensor({3, 2, 2}), x, w2); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("conv2d result does not depend on thread count") {
  Rng rng(4);
  Tensor x = random_tensor({4, 12, 10}, rng);
  Tensor w = random_tensor({8, 4, 3, 3}, rng);
  const auto b = random_vector(8, rng);
  Tensor g = random_tensor({8, 12, 10}, rng);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  Tensor y1 = conv2d_forward(x, w, b);
  auto g1 = conv2d_backward(g, x, w);
  omp_set_num_threads(4);
  Tensor y4 = conv2d_forward(x, w, b);
  auto g4 = conv2d_backward(g, x, w);
  omp_set_num_threads(saved);
  CHECK(y1 == y4);
  CHECK(g1.input == g4.input);
  CHECK(g1.weights == g4.weights);
  CHECK(g1.bias == g4.bias);
}

TEST_CASE("maxpool tie rule and routing") {
  SUBCASE("constant input routes to the first element") {
    Tensor x({1, 4, 4}, 2.5);
    auto r = maxpool2d_forward(x);
    for (double v : r.output.values) CHECK(v == 2.5);
    CHECK(r.argmax == std::vector<std::size_t>{0, 2, 8, 10});
    Tensor g = maxpool2d_backward(Tensor({1, 2, 2}, 1.0), r.argmax, x.shape);
    CHECK(g.values[0] == 1.0);
    CHECK(g.values[1] == 0.0);
    CHECK(g.values[4] == 0.0);
    CHECK(g.values[5] == 0.0);
  }
  SUBCASE("[1,2;3,4]") {
    Tensor x({1, 2, 2}, std::vector<double>{1, 2, 3, 4});
    auto r = maxpool2d_forward(x);
    CHECK(r.output.values == std::vector<double>{4.0});
    Tensor g = maxpool2d_backward(Tensor({1, 1, 1}, 0.7), r.argmax, x.shape);
    CHECK(g.values == std::vector<double>{0, 0, 0, 0.7});
  }
  SUBCASE("matches oracle") {
    Rng rng(5);
    Tensor x = random_tensor({3, 6, 8}, rng);
    CHECK(maxpool2d_forward(x).output == reference::maxpool2d(x));
  }
  CHECK(code_of([] { maxpool2d_forward(Tensor({1, 3, 4})); }) == ErrorCode::OddSpatialDim);
  CHECK(code_of([] { maxpool2d_forward(Tensor({1, 4, 5})); }) == ErrorCode::OddSpatialDim);
}

TEST_CASE("crop_to_even and its adjoint") {
  Tensor x({1, 3, 5});
  std::iota(x.values.begin(), x.values.end(), 0.0);
  Tensor c = crop_to_even(x);
  CHECK(c.shape == std::vector<std::size_t>{1, 2, 4});
  CHECK(c.values == std::vector<double>{0, 1, 2, 3, 5, 6, 7, 8});
  Tensor u = uncrop(c, x.shape);
  CHECK(u.shape == x.shape);
  CHECK(u.values[4] == 0.0);
  CHECK(u.values[14] == 0.0);
  CHECK(u.values[8] == 8.0);
  Tensor even({2, 4, 4}, 1.0);
  CHECK(crop_to_even(even) == even);
}

TEST_CASE("global average pooling") {
  Tensor x({2, 2, 2}, std::vector<double>{1, 2, 3, 4, -1, -1, -1, 5});
  auto m = global_avg_pool(x);
  CHECK(m == std::vector<double>{2.5, 0.5});
  const std::vector<double> g{4.0, 8.0};
  Tensor back = global_avg_pool_backward(g, x.shape);
  CHECK(back.values == std::vector<double>{1, 1, 1, 1, 2, 2, 2, 2});
}

TEST_CASE("dense layer") {
  Tensor w({2, 2}, std::vector<double>{1, 2, 3, 4});
  const std::vector<double> x{1, 1};
  const std::vector<double> zero{0, 0};
  CHECK(dense_forward(x, w, zero) == std::vector<double>{3, 7});
  Tensor eye({3, 3}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  const std::vector<double> v{0.5, -2, 7};
  CHECK(dense_forward(v, eye, std::vector<double>(3)) == v);

  Rng rng(6);
  Tensor wr = random_tensor({4, 3}, rng);
  const auto br = random_vector(4, rng);
  CHECK(max_abs_diff(dense_forward(v, wr, br), reference::dense(v, wr, br)) < 1e-12);

  const std::vector<double> g{1, -1};
  auto grads = dense_backward(g, x, w);
  CHECK(grads.input == std::vector<double>{-2, -2});
  CHECK(grads.weights.values == std::vector<double>{1, 1, -1, -1});
  CHECK(grads.bias == g);
  CHECK(code_of([&] { dense_forward(v, w, zero); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("relu") {
  std::vector<double> x{-1.0, 2.0, 0.0};
  const std::vector<double> saved = x;
  relu_inplace(x);
  CHECK(x == std::vector<double>{0.0, 2.0, 0.0});
  std::vector<double> g{5.0, 5.0, 5.0};
  relu_backward_inplace(g, saved);
  CHECK(g == std::vector<double>{0.0, 5.0, 0.0});
}

TEST_CASE("softmax cross-entropy") {
  const std::vector<double> uniform(6, 0.3);
  auto r = softmax_cross_entropy(uniform, 2);
  CHECK(r.loss == doctest::Approx(std::log(6.0)).epsilon(1e-12));
  CHECK(r.loss == doctest::Approx(1.791759).epsilon(1e-6));
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(r.grad[i] == doctest::Approx(1.0 / 6.0 - (i == 2 ? 1.0 : 0.0)).epsilon(1e-12));
  }

  Rng rng(7);
  const auto logits = random_vector(5, rng, 3.0);
  auto base = softmax_cross_entropy(logits, 4);
  std::vector<double> shifted = logits;
  for (double& v : shifted) v += 123.25;
  auto moved = softmax_cross_entropy(shifted, 4);
  CHECK(moved.loss == doctest::Approx(base.loss).epsilon(1e-9));
  CHECK(max_abs_diff(moved.grad, base.grad) < 1e-12);
  CHECK(std::abs(std::accumulate(base.grad.begin(), base.grad.end(), 0.0)) < 1e-9);

  const std::vector<double> huge{1000.0, 0.0};
  auto stable = softmax_cross_entropy(huge, 1);
  CHECK(std::isfinite(stable.loss));
  CHECK(stable.loss == doctest::Approx(1000.0));

  CHECK(code_of([&] { softmax_cross_entropy(logits, 5); }) == ErrorCode::LabelOutOfRange);
  CHECK(argmax(std::vector<double>{1, 3, 3, 0}) == 1);
}

TEST_CASE("lstm zero fixpoint") {
  LstmParams p("lstm", 3, 4);
  Rng rng(8);
  const auto x = random_vector(3 * 5, rng, 2.0);
  auto cache = lstm_forward(p, x, 5);
  for (double h : cache.hiddens) CHECK(h == 0.0);
  for (double c : cache.cells) CHECK(c == 0.0);
}

TEST_CASE("lstm scalar step by hand") {
  LstmParams p("lstm", 1, 1);
  p.input_weights.value.values = {0.5, -0.3, 0.8, 0.2};
  p.hidden_weights.value.values = {0.9, 0.9, 0.9, 0.9};
  p.bias.value.values = {0.1, 0.2, -0.1, 0.05};
  const std::vector<double> x{2.0};
  auto cache = lstm_forward(p, x, 1);
  const double i = sigmoid(0.5 * 2 + 0.1);
  const double g = std::tanh(0.8 * 2 - 0.1);
  const double o = sigmoid(0.2 * 2 + 0.05);
  const double c = i * g;  // previous cell is zero, forget gate has no effect
  CHECK(cache.cells[0] == doctest::Approx(c).epsilon(1e-14));
  CHECK(cache.final_hidden()[0] == doctest::Approx(o * std::tanh(c)).epsilon(1e-14));

  // Second step uses the recurrent weights.
  const std::vector<double> x2{2.0, -1.0};
  auto two = lstm_forward(p, x2, 2);
  const double h1 = o * std::tanh(c);
  const double i2 = sigmoid(-0.5 + 0.9 * h1 + 0.1);
  const double f2 = sigmoid(0.3 + 0.9 * h1 + 0.2);
  const double g2 = std::tanh(-0.8 + 0.9 * h1 - 0.1);
  const double o2 = sigmoid(-0.2 + 0.9 * h1 + 0.05);
  const double c2 = f2 * c + i2 * g2;
  CHECK(two.final_hidden()[0] == doctest::Approx(o2 * std::tanh(c2)).epsilon(1e-14));
}

TEST_CASE("lstm matches oracle and rejects empty input") {
  Rng rng(9);
  LstmParams p("lstm", 3, 5);
  for (Parameter* q : p.refs()) {
    for (double& v : q->value.values) v = rng.uniform(-0.5, 0.5);
  }
  const auto x = random_vector(3 * 4, rng);
  auto cache = lstm_forward(p, x, 4);
  auto want = reference::lstm_hiddens(p.input_weights.value, p.hidden_weights.value,
                                      p.bias.value.values, x, 4);
  CHECK(max_abs_diff(cache.hiddens, want) < 1e-12);
  CHECK(code_of([&] { lstm_forward(p, {}, 0); }) == ErrorCode::EmptySequence);
}

TEST_CASE("embedding lookup") {
  Tensor table({3, 2}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const std::vector<std::size_t> idx{2, 3, 0, 2};
  auto rows = embedding_lookup(table, idx);
  CHECK(rows == std::vector<double>{5, 6, 0, 0, 1, 2, 5, 6});

  Tensor grad({3, 2});
  const std::vector<double> g{1, 2, 10, 20, 3, 4, 5, 6};
  embedding_backward(grad, idx, g);
  CHECK(grad.values == std::vector<double>{3, 4, 0, 0, 6, 8});

  const std::vector<std::size_t> bad{4};
  CHECK(code_of([&] { embedding_lookup(table, bad); }) == ErrorCode::IndexOutOfRange);
}

TEST_CASE("glorot init stays in bounds") {
  Rng rng(10);
  Tensor t({30, 20});
  init_glorot_uniform(t, 20, 30, rng);
  const double limit = std::sqrt(6.0 / 50.0);
  double lo = 1.0, hi = -1.0;
  for (double v : t.values) {
    CHECK(std::abs(v) <= limit);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo < -0.8 * limit);
  CHECK(hi > 0.8 * limit);
}

TEST_CASE("adam") {
  SUBCASE("first step with unit gradient") {
    Parameter p("w", {1});
    p.value.values[0] = 0.25;
    Adam adam({&p});
    p.grad.values[0] = 1.0;
    adam.step({&p});
    CHECK(adam.steps() == 1);
    CHECK(0.25 - p.value.values[0] == doctest::Approx(1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    Parameter p("w", {3});
    p.value.values = {1, -2, 3};
    Adam adam({&p});
    for (int i = 0; i < 50; ++i) adam.step({&p});
    CHECK(p.value.values == std::vector<double>{1, -2, 3});
    CHECK(adam.steps() == 50);
  }
  SUBCASE("constant gradient moves monotonically") {
    Parameter p("w", {2});
    Adam adam({&p}, AdamConfig{.lr = 0.01});
    p.grad.values = {0.3, -2.0};
    double prev0 = 0.0, prev1 = 0.0;
    for (int i = 0; i < 100; ++i) {
      adam.step({&p});
      CHECK(p.value.values[0] < prev0);
      CHECK(p.value.values[1] > prev1);
      prev0 = p.value.values[0];
      prev1 = p.value.values[1];
    }
  }
  SUBCASE("shape changes are rejected") {
    Parameter p("w", {2});
    Adam adam({&p});
    p.value = Tensor({3});
    p.grad = Tensor({3});
    CHECK(code_of([&] { adam.step({&p}); }) == ErrorCode::ShapeMismatch);
    Parameter q("q", {2});
    CHECK(code_of([&] { adam.step({&p, &q}); }) == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("gradient check on a linear model is exact") {
  Rng rng(11);
  Parameter w("w", {4});
  Parameter b("b", {1});
  for (double& v : w.value.values) v = rng.uniform(-1, 1);
  const auto x = random_vector(4, rng);
  auto loss = [&] {
    double s = b.value.values[0];
    for (int i = 0; i < 4; ++i) s += w.value.values[i] * x[i];
    return s;
  };
  auto backward = [&] {
    for (int i = 0; i < 4; ++i) w.grad.values[i] += x[i];
    b.grad.values[0] += 1.0;
  };
  auto r = gradient_check(loss, backward, {&w, &b});
  CHECK(r.checked == 5);
  CHECK(r.max_relative_error < 1e-9);

  // A deliberately wrong gradient is caught.
  auto wrong = [&] {
    backward();
    w.grad.values[2] *= 1.01;
  };
  auto bad = gradient_check(loss, wrong, {&w, &b});
  CHECK(bad.max_relative_error > 1e-3);
  CHECK(bad.worst_parameter == "w[2]");
}

TEST_CASE("gradient check sampling") {
  Parameter w("w", {10});
  auto loss = [&] { return std::accumulate(w.value.values.begin(), w.value.values.end(), 0.0); };
  auto backward = [&] { w.grad.fill(1.0); };
  GradCheckOptions opt;
  opt.max_per_parameter = 4;
  CHECK(gradient_check(loss, backward, {&w}, opt).checked == 4);
  opt.max_per_parameter = 20;
  CHECK(gradient_check(loss, backward, {&w}, opt).checked == 10);
}

TEST_CASE("every layer passes the finite-difference check") {
  for (std::uint64_t seed : {1u, 2u}) {
    for (auto c : {gradcheck::conv2d(seed), gradcheck::maxpool2d(seed), gradcheck::dense(seed),
                   gradcheck::relu(seed), gradcheck::softmax_cross_entropy(seed),
                   gradcheck::lstm(seed), gradcheck::embedding(seed)}) {
      CAPTURE(c.name);
      CAPTURE(c.result.worst_parameter);
      CHECK(c.result.checked > 0);
      CHECK(c.result.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("rng") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 16; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    CHECK(x != c.next());
  }
  Rng base(5);
  Rng s1 = base.split("conv1");
  Rng s2 = base.split("conv1");
  Rng s3 = base.split("conv2");
  CHECK(s1.next() == s2.next());
  CHECK(s1.next() != s3.next());

  Rng r(3);
  double sum = 0.0;
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    const auto k = r.below(7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  CHECK(sum / 7000 == doctest::Approx(0.5).epsilon(0.03));
  for (int n : counts) CHECK(std::abs(n - 1000) < 150);

  std::vector<int> items(20);
  std::iota(items.begin(), items.end(), 0);
  Rng sh(9);
  sh.shuffle(std::span<int>(items));
  std::vector<int> sorted = items;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted[19] == 19);
  CHECK(items != sorted);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(12);
  Checkpoint ckpt;
  ckpt.kind = ModelKind::Rec;
  ckpt.add("a.weights", random_tensor({2, 3, 4}, rng));
  Tensor special({4}, std::vector<double>{0.1, -0.0, 1e-310, 1.0 / 3.0});
  ckpt.add("b", special);
  ckpt.strings["vocab"] = "alpha\nبتا\ngamma";

  const auto bytes = serialize_checkpoint(ckpt);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "EMPC");
  Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back.kind == ModelKind::Rec);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.tensors[0].first == "a.weights");
  CHECK(back.tensor("a.weights") == ckpt.tensor("a.weights"));
  CHECK(std::signbit(back.tensor("b").values[1]));
  CHECK(back.tensor("b").values[2] == 1e-310);
  CHECK(back.string("vocab") == ckpt.strings["vocab"]);
  CHECK(serialize_checkpoint(back) == bytes);

  SUBCASE("malformed inputs") {
    auto bad = bytes;
    bad[0] = 'X';
    CHECK(code_of([&] { deserialize_checkpoint(bad); }) == ErrorCode::MalformedCheckpoint);
    bad = bytes;
    bad[4] = 99;  // version
    CHECK(code_of([&] { deserialize_checkpoint(bad); }) == ErrorCode::MalformedCheckpoint);
    bad = bytes;
    bad[8] = 7;  // kind
    CHECK(code_of([&] { deserialize_checkpoint(bad); }) == ErrorCode::MalformedCheckpoint);
    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{20}, bytes.size() - 1}) {
      std::vector<std::uint8_t> shortened(bytes.begin(), bytes.begin() + cut);
      CHECK(code_of([&] { deserialize_checkpoint(shortened); }) == ErrorCode::MalformedCheckpoint);
    }
    bad = bytes;
    bad.push_back(0);
    CHECK(code_of([&] { deserialize_checkpoint(bad); }) == ErrorCode::MalformedCheckpoint);
    CHECK(code_of([&] { back.tensor("missing"); }) == ErrorCode::MalformedCheckpoint);
    CHECK(code_of([&] { back.string("missing"); }) == ErrorCode::MalformedCheckpoint);
  }
  SUBCASE("file io") {
    const auto path = std::filesystem::temp_directory_path() / "empath_nn_core_test.empc";
    save_checkpoint(path, ckpt);
    CHECK(read_file_bytes(path) == bytes);
    CHECK(load_checkpoint(path).tensor("b") == special);
    std::filesystem::remove(path);
    CHECK(code_of([&] { load_checkpoint(path); }) == ErrorCode::IoError);
  }
}
