#include <doctest.h>

#include "m3dseg/numerics/adam.hpp"
#include "m3dseg/numerics/random.hpp"

using namespace m3dseg::numerics;

TEST_CASE("first Adam step from a fresh state") {
  PrecisionScope f64(Precision::f64);
  std::vector<Tensor> params{Tensor::from_values({1}, {1.0})};
  std::vector<Tensor> grads{Tensor::from_values({1}, {0.5})};
  AdamState state(AdamConfig{.learning_rate = 0.1});
  adam_step(params, grads, state);
  // m_hat = 0.5, v_hat = 0.25 after bias correction.
  CHECK(params[0].item() == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
  CHECK(params[0].item() == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(state.step_count() == 1);
  CHECK(state.first_moment()[0].shape() == params[0].shape());
}

TEST_CASE("zero gradients leave parameters unchanged") {
  std::vector<Tensor> params{Tensor::from_values({3}, {1.0, -2.0, 0.5}), Tensor::full({2, 2}, 3.0)};
  const auto before = params;
  std::vector<Tensor> grads{Tensor::zeros({3}), Tensor::zeros({2, 2})};
  AdamState state;
  for (int i = 0; i < 10; ++i) adam_step(params, grads, state);
  CHECK(params == before);
  CHECK(state.step_count() == 10);
}

TEST_CASE("identical gradient streams give bit-identical parameters") {
  RandomStream rng(4, "adam");
  std::vector<Tensor> a{Tensor::full({5}, 0.3)}, b = a;
  AdamState sa, sb;
  for (int i = 0; i < 25; ++i) {
    Tensor g({5});
    for (std::size_t j = 0; j < 5; ++j) g.set(j, rng.normal());
    std::vector<Tensor> grads{g};
    adam_step(a, grads, sa);
    adam_step(b, grads, sb);
  }
  CHECK(a == b);
}

TEST_CASE("shape mismatch is rejected") {
  std::vector<Tensor> params{Tensor::zeros({3})};
  std::vector<Tensor> grads{Tensor::zeros({4})};
  AdamState state;
  CHECK_THROWS_AS(adam_step(params, grads, state), NumericsError);
}
