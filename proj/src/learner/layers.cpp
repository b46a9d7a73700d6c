#include "m3dseg/learner/layers.hpp"

#include <cmath>

#include "m3dseg/numerics/ops.hpp"

namespace m3dseg::learner {

using namespace numerics;

std::string layer_name(const std::string& prefix, std::size_t i, const char* what) {
  return prefix + ".fc" + std::to_string(i) + "." + what;
}

void add_dense_stack(ParameterSet& set, const std::string& prefix, std::size_t in,
                     const std::vector<std::size_t>& dims, RandomStream& rng) {
  for (std::size_t i = 0; i < dims.size(); ++i) {
    Tensor w({dims[i], in});
    const double std_dev = std::sqrt(2.0 / static_cast<double>(in));
    for (std::size_t k = 0; k < w.size(); ++k) w.set(k, std_dev * rng.normal());
    set.add(layer_name(prefix, i, "weight"), std::move(w));
    set.add(layer_name(prefix, i, "bias"), Tensor({dims[i]}));
    in = dims[i];
  }
}

Var dense_stack(const BoundParameters& params, const std::string& prefix, std::size_t layers, Var x) {
  for (std::size_t i = 0; i < layers; ++i) {
    x = linear(x, params[layer_name(prefix, i, "weight")], params[layer_name(prefix, i, "bias")]);
    if (i + 1 < layers) x = relu(x);
  }
  return x;
}

Var conditioned_dense_stack(const BoundParameters& params, const std::string& prefix, std::size_t layers,
                            Var shared, Var rows) {
  Var x = conditioned_linear(shared, rows, params[layer_name(prefix, 0, "weight")],
                             params[layer_name(prefix, 0, "bias")]);
  for (std::size_t i = 1; i < layers; ++i) {
    x = relu(x);
    x = linear(x, params[layer_name(prefix, i, "weight")], params[layer_name(prefix, i, "bias")]);
  }
  return x;
}

}  // namespace m3dseg::learner
