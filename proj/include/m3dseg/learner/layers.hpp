#pragma once

#include <string>
#include <vector>

#include "m3dseg/numerics/parameters.hpp"
#include "m3dseg/numerics/random.hpp"

namespace m3dseg::learner {

/// Adds `<prefix>.fc<i>.weight` [out, in] and `.bias` [out] for each width in
/// `dims`. Weights are He-normal, biases zero.
void add_dense_stack(numerics::ParameterSet& set, const std::string& prefix, std::size_t in,
                     const std::vector<std::size_t>& dims, numerics::RandomStream& rng);

/// Applies the stack to x ([n] or [b, n]) with ReLU between layers and a
/// linear last layer.
numerics::Var dense_stack(const numerics::BoundParameters& params, const std::string& prefix,
                          std::size_t layers, numerics::Var x);

/// Same as dense_stack on the rows [shared, rows_i] of a [n, k] matrix.
numerics::Var conditioned_dense_stack(const numerics::BoundParameters& params, const std::string& prefix,
                                      std::size_t layers, numerics::Var shared, numerics::Var rows);

std::string layer_name(const std::string& prefix, std::size_t i, const char* what);

}  // namespace m3dseg::learner
