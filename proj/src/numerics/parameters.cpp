#include "m3dseg/numerics/parameters.hpp"

#include <algorithm>

#include "m3dseg/numerics/random.hpp"

namespace m3dseg::numerics {

void ParameterSet::add(std::string name, Tensor value) {
  if (contains(name)) throw NumericsError("duplicate parameter name '" + name + "'");
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
}

bool ParameterSet::contains(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t ParameterSet::index_of(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw NumericsError("unknown parameter '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

Tensor& ParameterSet::get(std::string_view name) { return tensors_[index_of(name)]; }
const Tensor& ParameterSet::get(std::string_view name) const { return tensors_[index_of(name)]; }

std::size_t ParameterSet::element_count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

std::vector<Var> ParameterSet::bind(Graph& graph, bool trainable) const {
  std::vector<Var> vars;
  vars.reserve(tensors_.size());
  for (const Tensor& t : tensors_) {
    Tensor leaf = t;
    leaf.set_requires_grad(trainable);
    vars.push_back(graph.leaf(std::move(leaf)));
  }
  return vars;
}

std::uint64_t digest(const ParameterSet& set) {
  std::uint64_t h = fnv1a64("m3dseg.parameters");
  for (std::size_t i = 0; i < set.size(); ++i) {
    h = fnv1a64(set.names()[i], h);
    const Tensor& t = set.tensors()[i];
    for (auto d : t.shape()) {
      const std::uint64_t dim = d;
      h = fnv1a64(&dim, sizeof dim, h);
    }
    dispatch(t.precision(), [&]<class T>() {
      const auto data = t.data<T>();
      h = fnv1a64(data.data(), data.size_bytes(), h);
    });
  }
  return h;
}

}  // namespace m3dseg::numerics
