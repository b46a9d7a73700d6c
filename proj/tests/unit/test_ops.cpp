#include <doctest.h>

#include <cmath>

#include "m3dseg/numerics/ops.hpp"
#include "support/gradcheck.hpp"

using namespace m3dseg::numerics;
using testing::check_gradients;
using testing::random_tensor;

TEST_CASE("linear with identity weight and zero bias returns its input") {
  Graph g;
  Tensor eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.set(i * 4, 1.0);
  Var x = g.constant(Tensor::from_values({3}, {0.25, -1.5, 4.0}));
  Var y = linear(x, g.constant(eye), g.constant(Tensor::zeros({3})));
  CHECK(y.value() == x.value());
}

TEST_CASE("linear of a zero input returns the bias") {
  Graph g;
  RandomStream rng(1, "w");
  Var b = g.constant(random_tensor({4}, rng, 1.0, false));
  Var y = linear(g.constant(Tensor::zeros({5})), g.constant(random_tensor({4, 5}, rng, 1.0, false)), b);
  CHECK(y.value() == b.value());
}

TEST_CASE("linear matches an explicit dot-product oracle") {
  PrecisionScope f64(Precision::f64);
  RandomStream rng(2, "w");
  Tensor w = random_tensor({3, 5}, rng, 1.0, false), x = random_tensor({5}, rng, 1.0, false),
         b = random_tensor({3}, rng, 1.0, false);
  Graph g;
  Var y = linear(g.constant(x), g.constant(w), g.constant(b));
  for (std::size_t i = 0; i < 3; ++i) {
    double dot = b.at(i);
    for (std::size_t j = 0; j < 5; ++j) dot += w.at(i * 5 + j) * x.at(j);
    CHECK(std::abs(y.value().at(i) - dot) < 1e-7);
  }
  CHECK_THROWS_AS(linear(g.constant(Tensor::zeros({4})), g.constant(w), g.constant(b)),
                  NumericsError);
}

TEST_CASE("conditioned_linear equals linear on concatenated rows") {
  PrecisionScope f64(Precision::f64);
  RandomStream rng(3, "w");
  Graph g;
  Var shared = g.constant(random_tensor({4}, rng, 1.0, false));
  Var rows = g.constant(random_tensor({6, 3}, rng, 1.0, false));
  Var w = g.constant(random_tensor({5, 7}, rng, 1.0, false));
  Var b = g.constant(random_tensor({5}, rng, 1.0, false));
  Var fused = conditioned_linear(shared, rows, w, b);
  Var plain = linear(concat_rows(shared, rows), w, b);
  for (std::size_t i = 0; i < fused.size(); ++i)
    CHECK(std::abs(fused.value().at(i) - plain.value().at(i)) < 1e-12);
}

TEST_CASE("activation definition points") {
  Graph g;
  Var x = g.constant(Tensor::from_values({3}, {0.0, -3.0, 3.0}));
  Var s = sigmoid(x);
  Var r = relu(x);
  CHECK(s.value().at(0) == 0.5);
  CHECK(r.value().at(1) == 0.0);
  CHECK(r.value().at(2) == 3.0);

  Var extreme = sigmoid(g.constant(Tensor::from_values({2}, {200.0, -200.0})));
  CHECK(extreme.value().at(0) < 1.0);
  CHECK(extreme.value().at(1) > 0.0);
}

TEST_CASE("sigmoid gradient at zero is 0.25 and matches finite differences") {
  PrecisionScope f64(Precision::f64);
  Tensor x = Tensor::from_values({1}, {0.0});
  x.set_requires_grad(true);
  Graph g;
  Var xv = g.leaf(x);
  Var y = sigmoid(xv);
  g.backward(y);
  CHECK(g.grad(xv).item() == doctest::Approx(0.25).epsilon(1e-12));
  const double h = 1e-5;
  const double fd = (1.0 / (1.0 + std::exp(-h)) - 1.0 / (1.0 + std::exp(h))) / (2 * h);
  CHECK(std::abs(g.grad(xv).item() - fd) < 1e-6);
}

TEST_CASE("channel_max picks the maximum with lowest-index ties") {
  Graph g;
  auto a = channel_max(g.constant(Tensor::from_values({3}, {0.2, 0.9, 0.5})));
  CHECK(a.value.value().item() == doctest::Approx(0.9));
  CHECK(a.argmax[0] == 1);
  auto b = channel_max(g.constant(Tensor::full({4}, 0.5)));
  CHECK(b.value.value().item() == 0.5);
  CHECK(b.argmax[0] == 0);
}

TEST_CASE("channel_max gradient is one-hot and carries the upstream gradient") {
  PrecisionScope f64(Precision::f64);
  RandomStream rng(5, "cm");
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor({6}, rng);
    Graph g;
    Var xv = g.leaf(x);
    auto cm = channel_max(xv);
    Var loss = scale(cm.value, 3.0);
    g.backward(loss);
    Tensor gx = g.grad(xv);
    double total = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      if (i == cm.argmax[0])
        CHECK(gx.at(i) == 3.0);
      else
        CHECK(gx.at(i) == 0.0);
      total += gx.at(i);
    }
    CHECK(total == 3.0);
    auto r = check_gradients({x}, [](Graph&, const std::vector<Var>& v) {
      return channel_max(v[0]).value;
    });
    CHECK(r.max_rel_error < 1e-5);
  }
}

TEST_CASE("backward of sum gives ones") {
  Tensor x = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  x.set_requires_grad(true);
  Graph g;
  Var xv = g.leaf(x);
  g.backward(sum(xv));
  CHECK(g.grad(xv) == Tensor::full({2, 3}, 1.0));
}

TEST_CASE("backward errors") {
  Graph g;
  Tensor x = Tensor::from_values({2}, {1, 2});
  x.set_requires_grad(true);
  Var xv = g.leaf(x);
  CHECK_THROWS_AS(g.backward(relu(xv)), NumericsError);
  Var detached = sum(g.constant(Tensor::full({3}, 1.0)));
  CHECK_THROWS_AS(g.backward(detached), NumericsError);
  Graph other;
  Var foreign = sum(other.leaf(x));
  CHECK_THROWS_AS(g.backward(foreign), NumericsError);
}

TEST_CASE("backward twice over the same graph is bit-identical") {
  RandomStream rng(9, "det");
  Tensor w = random_tensor({4, 6}, rng), b = random_tensor({4}, rng);
  Graph g;
  Var wv = g.leaf(w), bv = g.leaf(b);
  Var x = g.constant(random_tensor({10, 6}, rng, 1.0, false));
  Var loss = mean_squared_error(sigmoid(linear(x, wv, bv)), Tensor::full({10, 4}, 1.0));
  g.backward(loss);
  Tensor first_w = g.grad(wv), first_b = g.grad(bv);
  g.backward(loss);
  CHECK(g.grad(wv) == first_w);
  CHECK(g.grad(bv) == first_b);
}

TEST_SUITE("gradients vs finite differences (64-bit, h = 1e-5)") {
  constexpr int kTrials = 20;
  constexpr double kTol = 1e-4;

  template <class Build>
  double worst_over_trials(const char* name, std::vector<Shape> shapes, Build build) {
    PrecisionScope f64(Precision::f64);
    RandomStream rng(42, name);
    double worst = 0;
    for (int t = 0; t < kTrials; ++t) {
      std::vector<Tensor> inputs;
      for (const auto& s : shapes) inputs.push_back(random_tensor(s, rng, 0.7));
      worst = std::max(worst, check_gradients(inputs, build, 1e-5, 64, t + 1).max_rel_error);
    }
    return worst;
  }

  TEST_CASE("conv3d") {
    CHECK(worst_over_trials("conv3d", {{2, 4, 4, 4}, {3, 2, 4, 4, 4}, {3}},
                            [](Graph&, const std::vector<Var>& v) {
                              return sum(sigmoid(conv3d(v[0], v[1], v[2], 2, 1)));
                            }) < kTol);
  }
  TEST_CASE("linear (vector and batched)") {
    CHECK(worst_over_trials("linear", {{5}, {3, 5}, {3}},
                            [](Graph&, const std::vector<Var>& v) {
                              return sum(sigmoid(linear(v[0], v[1], v[2])));
                            }) < kTol);
    CHECK(worst_over_trials("linear_batched", {{4, 5}, {3, 5}, {3}},
                            [](Graph&, const std::vector<Var>& v) {
                              return sum(sigmoid(linear(v[0], v[1], v[2])));
                            }) < kTol);
  }
  TEST_CASE("sigmoid(linear(x)) composition") {
    CHECK(worst_over_trials("composed", {{6}, {1, 6}, {1}},
                            [](Graph&, const std::vector<Var>& v) {
                              return sigmoid(linear(v[0], v[1], v[2]));
                            }) < kTol);
  }
  TEST_CASE("conditioned_linear") {
    CHECK(worst_over_trials("conditioned", {{4}, {5, 3}, {2, 7}, {2}},
                            [](Graph&, const std::vector<Var>& v) {
                              return sum(sigmoid(conditioned_linear(v[0], v[1], v[2], v[3])));
                            }) < kTol);
  }
  TEST_CASE("relu, exp and elementwise arithmetic") {
    CHECK(worst_over_trials("relu", {{12}}, [](Graph&, const std::vector<Var>& v) {
            return sum(mul(relu(v[0]), v[0]));
          }) < kTol);
    CHECK(worst_over_trials("exp", {{8}, {8}}, [](Graph&, const std::vector<Var>& v) {
            return sum(add_scalar(scale(mul(exp(v[0]), sub(v[1], v[0])), 0.5), 2.0));
          }) < kTol);
    CHECK(worst_over_trials("add", {{8}, {8}}, [](Graph&, const std::vector<Var>& v) {
            return sum(mul(add(v[0], v[1]), v[1]));
          }) < kTol);
  }
  TEST_CASE("channel_max over rows") {
    CHECK(worst_over_trials("rowmax", {{5, 4}}, [](Graph&, const std::vector<Var>& v) {
            return sum(mul(channel_max(v[0]).value, channel_max(v[0]).value));
          }) < kTol);
  }
  TEST_CASE("slice, reshape, concat_rows, mean_rows") {
    CHECK(worst_over_trials("slice", {{12}}, [](Graph&, const std::vector<Var>& v) {
            Var a = reshape(slice(v[0], 2, {2, 3}), {6});
            return sum(mul(a, a));
          }) < kTol);
    CHECK(worst_over_trials("concat", {{3}, {4, 2}}, [](Graph&, const std::vector<Var>& v) {
            Var c = concat_rows(v[0], v[1]);
            return sum(sigmoid(c));
          }) < kTol);
    CHECK(worst_over_trials("mean_rows", {{6, 3}}, [](Graph&, const std::vector<Var>& v) {
            Var m = mean_rows(v[0]);
            return sum(mul(m, m));
          }) < kTol);
  }
  TEST_CASE("mean_squared_error") {
    CHECK(worst_over_trials("mse", {{9}}, [](Graph&, const std::vector<Var>& v) {
            return mean_squared_error(sigmoid(v[0]), Tensor::full({9}, 1.0));
          }) < kTol);
  }
}
