#include "mtaw/numerics/graph.hpp"

#include <algorithm>
#include <string>

#include "mtaw/errors.hpp"

namespace mtaw::num {

Graph::Node& Graph::node(Var v) {
  if (v.id >= nodes_.size()) throw std::out_of_range("graph variable out of range");
  return nodes_[v.id];
}

const Graph::Node& Graph::node(Var v) const {
  if (v.id >= nodes_.size()) throw std::out_of_range("graph variable out of range");
  return nodes_[v.id];
}

Var Graph::constant(Tensor value) {
  Node& n = nodes_.emplace_back();
  n.owned = std::move(value);
  n.owned.set_requires_grad(false);
  n.owned.clear_grad();
  return Var{nodes_.size() - 1};
}

Var Graph::parameter(Tensor& param) {
  Node& n = nodes_.emplace_back();
  n.view = &param;
  if (param.requires_grad()) {
    n.sink = &param;
    n.requires_grad = true;
  }
  return Var{nodes_.size() - 1};
}

Var Graph::parameter(const Tensor& param) {
  Node& n = nodes_.emplace_back();
  n.view = &param;
  return Var{nodes_.size() - 1};
}

Var Graph::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (Var in : inputs) needs = needs || node(in).requires_grad;
  Node& n = nodes_.emplace_back();
  n.owned = std::move(value);
  n.owned.clear_grad();
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  return Var{nodes_.size() - 1};
}

const Tensor& Graph::value(Var v) const {
  const Node& n = node(v);
  return n.view ? *n.view : n.owned;
}

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

std::span<double> Graph::grad(Var v) {
  Node& n = node(v);
  if (!n.requires_grad) return {};
  if (n.grad.empty()) n.grad.assign(value(v).size(), 0.0);
  return n.grad;
}

std::span<const double> Graph::grad(Var v) const {
  const Node& n = node(v);
  return n.grad;
}

void Graph::backward(Var loss) {
  const Tensor& out = value(loss);
  if (out.size() != 1) {
    throw DimensionError("backward() needs a scalar loss, got shape " + to_string(out.shape()));
  }
  for (Node& n : nodes_) n.grad.clear();
  if (!node(loss).requires_grad) return;

  grad(loss)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, Var{id});
  }
  for (std::size_t id = 0; id <= loss.id; ++id) {
    Node& n = nodes_[id];
    if (!n.sink || n.grad.empty()) continue;
    auto dst = n.sink->grad();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
  }
}

}  // namespace mtaw::num
