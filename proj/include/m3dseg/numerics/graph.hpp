#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "m3dseg/numerics/tensor.hpp"

namespace m3dseg::numerics {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  std::size_t id() const { return id_; }
  Graph* graph() const { return graph_; }
  bool requires_grad() const;
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only tape of op records. Inputs always precede outputs, so the
/// reverse insertion order is a valid topological order for backward.
class Graph {
 public:
  /// Adds this node's contribution to the gradient slots of its inputs.
  using BackwardFn = std::function<void(Graph&, std::size_t node)>;

  struct Node {
    std::string op;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    bool requires_grad = false;
    BackwardFn backward;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf whose gradient is tracked iff `value.requires_grad()`.
  Var leaf(Tensor value);
  Var constant(Tensor value);

  /// Records an op output. The node requires grad iff any input does; the
  /// backward closure is dropped otherwise.
  Var record(std::string op, const std::vector<Var>& inputs, Tensor value, BackwardFn backward);

  /// Reverse-mode sweep from a scalar loss. Gradient slots are reset first,
  /// so repeated calls on the same graph give identical results.
  void backward(Var loss);

  /// Gradient of `v` from the last backward(); zeros if none reached it.
  Tensor grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }

  // Accessors for backward closures.
  const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad_of(std::size_t id) const { return nodes_[id].grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  Tensor& grad_slot(std::size_t id);
  std::size_t input(std::size_t node, std::size_t k) const { return nodes_[node].inputs[k]; }

 private:
  void check_owner(Var v, const char* what) const;
  std::vector<Node> nodes_;
};

}  // namespace m3dseg::numerics
