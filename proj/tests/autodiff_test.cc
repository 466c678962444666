// Copyright 2026  The sambr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "oracles.hpp"
#include "sambr/autodiff.hpp"
#include "sambr/random.hpp"

namespace sambr::ad {
namespace {

using Builder = std::function<Var(Tape&, std::vector<Var>&)>;

Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (double& v : t.storage()) v = u(rng);
  return t;
}

// Compares the tape gradient of every input with central differences.
double check_gradient(const std::vector<Tensor>& inputs, const Builder& build) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.variable(t));
  Var loss = build(tape, vars);
  tape.backward(loss);
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = tape.grad(vars[k]);
    const Tensor numeric = oracle::numeric_gradient(
        [&](const Tensor& xk) {
          Tape t2;
          std::vector<Var> v2;
          for (std::size_t j = 0; j < inputs.size(); ++j)
            v2.push_back(t2.variable(j == k ? xk : inputs[j]));
          return build(t2, v2).item();
        },
        inputs[k]);
    worst = std::max(worst, oracle::max_rel_err(analytic.data(), numeric.data(), 1e-6));
  }
  return worst;
}

// Weighted sum so that every output entry gets a distinct upstream gradient.
Var probe(Tape& tape, Var y) {
  Tensor w(y.shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.7 * std::sin(1.0 + 1.3 * i);
  return reduce_sum(mul(y, tape.constant(w)));
}

struct OpCase {
  std::string name;
  std::vector<Shape> shapes;
  Builder build;
  double lo = -1.0;
};

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const auto& c = GetParam();
  Rng rng(fnv1a(c.name));
  for (int rep = 0; rep < 3; ++rep) {
    std::vector<Tensor> in;
    for (const auto& s : c.shapes) in.push_back(random_tensor(s, rng, c.lo, 1.0));
    EXPECT_LT(check_gradient(in, c.build), 1e-6) << c.name;
  }
}

std::vector<OpCase> op_cases() {
  using V = std::vector<Var>;
  return {
      {"matmul", {{2, 3}, {3, 4}}, [](Tape& t, V& v) { return probe(t, matmul(v[0], v[1])); }},
      {"add", {{2, 3}, {2, 3}}, [](Tape& t, V& v) { return probe(t, add(v[0], v[1])); }},
      {"sub", {{2, 3}, {2, 3}}, [](Tape& t, V& v) { return probe(t, sub(v[0], v[1])); }},
      {"mul", {{2, 3}, {2, 3}}, [](Tape& t, V& v) { return probe(t, mul(v[0], v[1])); }},
      {"affine", {{3, 2}}, [](Tape& t, V& v) { return probe(t, affine(v[0], -1.7, 0.4)); }},
      {"tanh", {{2, 4}}, [](Tape& t, V& v) { return probe(t, tanh(v[0])); }},
      {"sigmoid", {{2, 4}}, [](Tape& t, V& v) { return probe(t, sigmoid(v[0])); }},
      {"exp", {{2, 4}}, [](Tape& t, V& v) { return probe(t, exp(v[0])); }},
      {"log", {{2, 4}}, [](Tape& t, V& v) { return probe(t, log(v[0])); }, 0.2},
      {"softmax_rows", {{3, 4}}, [](Tape& t, V& v) { return probe(t, softmax(v[0], 1)); }},
      {"softmax_cols", {{3, 4}}, [](Tape& t, V& v) { return probe(t, softmax(v[0], 0)); }},
      {"log_softmax", {{3, 5}}, [](Tape& t, V& v) { return probe(t, log_softmax(v[0], 1)); }},
      {"concat_cols", {{2, 1}, {2, 3}},
       [](Tape& t, V& v) { return probe(t, concat({v[0], v[1]}, 1)); }},
      {"concat_rows", {{1, 3}, {2, 3}},
       [](Tape& t, V& v) { return probe(t, concat({v[0], v[1]}, 0)); }},
      {"slice", {{3, 5}},
       [](Tape& t, V& v) { return probe(t, add(slice(v[0], 1, 1, 3), slice(v[0], 1, 2, 4))); }},
      {"slice_rows", {{4, 2}}, [](Tape& t, V& v) { return probe(t, slice(v[0], 0, 1, 3)); }},
      {"reduce_mean", {{2, 3}}, [](Tape& t, V& v) { return probe(t, reduce_mean(v[0])); }},
      {"reshape", {{2, 3}}, [](Tape& t, V& v) { return probe(t, reshape(v[0], {3, 2})); }},
      {"pick", {{2, 3}},
       [](Tape&, V& v) { return add(pick(v[0], 1, 2), scale(pick(v[0], 0, 1), 3.0)); }},
      {"tile_rows", {{1, 3}}, [](Tape& t, V& v) { return probe(t, tile_rows(v[0], 4)); }},
      {"fan_out", {{2, 2}},
       [](Tape& t, V& v) { return probe(t, mul(tanh(v[0]), matmul(v[0], v[0]))); }},
      {"gru_like", {{1, 3}, {3, 3}, {1, 3}},
       [](Tape& t, V& v) {
         Var z = sigmoid(matmul(v[0], v[1]));
         Var h = add(mul(z, v[2]), mul(affine(z, -1.0, 1.0), tanh(matmul(v[2], v[1]))));
         return probe(t, log_softmax(h, 1));
       }},
  };
}

INSTANTIATE_TEST_SUITE_P(Ops, OpGradient, ::testing::ValuesIn(op_cases()),
                         [](const auto& info) { return info.param.name; });

TEST(Tape, ForwardValues) {
  Tape t;
  Var a = t.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Var b = t.constant(Tensor::matrix(2, 1, {5, 6}));
  EXPECT_EQ(matmul(a, b).value().storage(), (std::vector<double>{17, 39}));
  Var s = softmax(t.constant(Tensor::row({0.0, std::log(3.0)})), 1);
  EXPECT_NEAR(s.value()[0], 0.25, 1e-15);
  EXPECT_NEAR(s.value()[1], 0.75, 1e-15);
  EXPECT_EQ(concat({t.constant(Tensor::row({1})), t.constant(Tensor::row({2, 3}))}, 1)
                .value()
                .storage(),
            (std::vector<double>{1, 2, 3}));
}

TEST(Tape, LogSoftmaxIsStableForLargeInputs) {
  Tape t;
  Var x = t.variable(Tensor::row({1000.0, 0.0, -1000.0}));
  Var y = log_softmax(x, 1);
  EXPECT_NEAR(y.value()[0], 0.0, 1e-12);
  EXPECT_NEAR(y.value()[1], -1000.0, 1e-9);
  t.backward(pick(y, 0, 1));
  const Tensor g = t.grad(x);
  EXPECT_NEAR(g[0], -1.0, 1e-12);
  EXPECT_NEAR(g[1], 1.0, 1e-12);
  EXPECT_NEAR(g[2], 0.0, 1e-12);
}

TEST(Tape, SoftmaxShiftInvariantAndGradientSumsToZero) {
  Rng rng(11);
  const Tensor x = random_tensor({1, 5}, rng, -3, 3);
  Tensor shifted = x;
  for (double& v : shifted.storage()) v += 41.5;
  Tape t;
  Var a = t.variable(x);
  Var sa = softmax(a, 1), sb = softmax(t.constant(shifted), 1);
  EXPECT_LT(oracle::max_rel_err(sa.value().data(), sb.value().data()), 1e-12);
  t.backward(probe(t, sa));
  const Tensor g = t.grad(a);
  double s = 0.0;
  for (double v : g.data()) s += v;
  EXPECT_NEAR(s, 0.0, 1e-14);
}

TEST(Tape, ConstantsReceiveNoGradientAndParamsAreSlotted) {
  Tape t;
  Var c = t.constant(Tensor::row({1, 2}));
  Var p0 = t.param(Tensor::row({3, 4}), 0);
  Var p2 = t.param(Tensor::row({5, 6}), 2);
  const GradientMap g = t.backward(reduce_sum(add(mul(c, p0), p0)));
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g[0].storage(), (std::vector<double>{2, 3}));
  EXPECT_EQ(g[1].size(), 0u);
  EXPECT_EQ(g[2].storage(), (std::vector<double>{0, 0}));
  EXPECT_EQ(t.grad(c).storage(), (std::vector<double>{0, 0}));
  (void)p2;
}

TEST(Tape, BackwardFromSeedsEqualsLinearLoss) {
  Rng rng(12);
  const Tensor x = random_tensor({2, 3}, rng);
  const Tensor w = random_tensor({3, 2}, rng);
  const Tensor seed = random_tensor({2, 2}, rng);
  Tape t1;
  Var a1 = t1.variable(x);
  Var y1 = tanh(matmul(a1, t1.constant(w)));
  t1.backward_from({{y1, seed}});
  Tape t2;
  Var a2 = t2.variable(x);
  Var y2 = tanh(matmul(a2, t2.constant(w)));
  t2.backward(reduce_sum(mul(y2, t2.constant(seed))));
  EXPECT_LT(oracle::max_rel_err(t1.grad(a1).data(), t2.grad(a2).data()), 1e-15);
}

TEST(Tape, RepeatedBackwardDoesNotAccumulate) {
  Tape t;
  Var a = t.variable(Tensor::row({1, 2}));
  Var l = reduce_sum(mul(a, a));
  t.backward(l);
  t.backward(l);
  EXPECT_EQ(t.grad(a).storage(), (std::vector<double>{2, 4}));
}

TEST(Tape, Errors) {
  Tape t, other;
  Var a = t.variable(Tensor({2, 3}));
  Var b = t.variable(Tensor({2, 2}));
  EXPECT_THROW(matmul(a, b), DimensionError);
  EXPECT_THROW(add(a, b), DimensionError);
  EXPECT_THROW(mul(a, b), DimensionError);
  EXPECT_THROW(reshape(a, {4, 2}), DimensionError);
  EXPECT_THROW(slice(a, 1, 2, 5), DimensionError);
  EXPECT_THROW(pick(a, 2, 0), DimensionError);
  EXPECT_THROW(tile_rows(a, 2), DimensionError);
  EXPECT_THROW(t.backward(a), ContractError);
  EXPECT_THROW(add(a, other.variable(Tensor({2, 3}))), ContractError);
  EXPECT_THROW(other.backward(reduce_sum(a)), ContractError);
  EXPECT_THROW(t.backward_from({{a, Tensor({3, 2})}}), DimensionError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(log(t.constant(Tensor::row({0.0}))), NumericError);
  EXPECT_THROW(t.constant(Tensor::row({std::nan("")})), NumericError);
}

}  // namespace
}  // namespace sambr::ad
