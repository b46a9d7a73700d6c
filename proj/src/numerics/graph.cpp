#include "m3dseg/numerics/graph.hpp"

namespace m3dseg::numerics {

const Tensor& Var::value() const {
  if (!graph_) throw NumericsError("use of an unbound Var");
  return graph_->value_of(id_);
}

bool Var::requires_grad() const { return graph_ && graph_->needs_grad(id_); }

void Graph::check_owner(Var v, const char* what) const {
  if (v.graph() != this || v.id() >= nodes_.size())
    throw NumericsError(std::string(what) + ": variable belongs to a different graph");
}

Var Graph::leaf(Tensor value) {
  const bool rg = value.requires_grad();
  return record(rg ? "param" : "const", {}, std::move(value), {});
}

Var Graph::constant(Tensor value) {
  value.set_requires_grad(false);
  return record("const", {}, std::move(value), {});
}

Var Graph::record(std::string op, const std::vector<Var>& inputs, Tensor value,
                  BackwardFn backward) {
  if (checked_mode() && !value.all_finite())
    throw NumericsError("non-finite value produced by op '" + op + "'");
  Node n;
  n.op = std::move(op);
  n.requires_grad = inputs.empty() && value.requires_grad();
  for (const Var& in : inputs) {
    check_owner(in, n.op.c_str());
    if (!inputs.empty() && in.graph()->value_of(in.id()).precision() != value.precision())
      throw NumericsError("op '" + n.op + "' mixes tensor precisions");
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad && !inputs.empty()) n.backward = std::move(backward);
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Tensor& Graph::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape(), n.value.precision());
  return n.grad;
}

void Graph::backward(Var loss) {
  check_owner(loss, "backward");
  const Node& ln = nodes_[loss.id()];
  if (ln.value.size() != 1)
    throw NumericsError("backward requires a scalar loss, got shape " +
                        shape_string(ln.value.shape()));
  if (!ln.requires_grad)
    throw NumericsError("backward on a loss detached from every trainable leaf");
  for (Node& n : nodes_) n.grad = Tensor();
  grad_slot(loss.id()).fill(1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
}

Tensor Graph::grad(Var v) const {
  check_owner(v, "grad");
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return Tensor::zeros(n.value.shape(), n.value.precision());
  return n.grad;
}

}  // namespace m3dseg::numerics
