#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "m3dseg/numerics/graph.hpp"
#include "m3dseg/numerics/tensor.hpp"

namespace m3dseg::numerics {

/// Ordered, named collection of parameter tensors. Order is insertion order
/// and is what checkpoints and optimizer states index by.
class ParameterSet {
 public:
  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  Tensor& get(std::string_view name);
  const Tensor& get(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  std::size_t size() const { return tensors_.size(); }
  bool empty() const { return tensors_.empty(); }
  std::size_t element_count() const;
  const std::vector<std::string>& names() const { return names_; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }

  /// Leaves for every tensor, trainable iff `trainable`. Indexed like tensors().
  std::vector<Var> bind(Graph& graph, bool trainable) const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.names_ == b.names_ && a.tensors_ == b.tensors_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

/// FNV-1a over names, shapes and raw values in order.
std::uint64_t digest(const ParameterSet& set);

/// Lookup of bound leaves by parameter name.
class BoundParameters {
 public:
  BoundParameters() = default;
  BoundParameters(const ParameterSet& set, Graph& graph, bool trainable)
      : set_(&set), vars_(set.bind(graph, trainable)) {}

  Var operator[](std::string_view name) const { return vars_.at(set_->index_of(name)); }
  const std::vector<Var>& vars() const { return vars_; }

 private:
  const ParameterSet* set_ = nullptr;
  std::vector<Var> vars_;
};

}  // namespace m3dseg::numerics
