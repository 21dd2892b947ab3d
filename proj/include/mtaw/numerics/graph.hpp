#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "mtaw/numerics/tensor.hpp"

namespace mtaw::num {

class Graph;

/// Handle to a node of a Graph. Only meaningful for the graph that issued it.
struct Var {
  std::size_t id = kNoRow;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so the record
/// is topologically sorted and acyclic by construction; backward() walks it
/// in reverse and visits each node once.
///
/// A graph is single-threaded. Parameter nodes reference caller-owned
/// tensors, which must outlive the graph.
class Graph {
 public:
  /// Propagates grad(out) into the gradients of the node's inputs.
  using BackwardFn = std::function<void(Graph&, Var out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  Var constant(Tensor value);
  /// Trainable leaf: if `param.requires_grad()`, backward() adds into param.grad().
  Var parameter(Tensor& param);
  /// Read-only leaf; never receives gradients.
  Var parameter(const Tensor& param);

  /// Appends an op output. The node requires grad iff any input does.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  /// Gradient buffer of a node, allocated on demand. Empty for nodes that
  /// do not require grad.
  std::span<double> grad(Var v);
  std::span<const double> grad(Var v) const;

  /// Computes d(loss)/d(node) for every grad-requiring node, then adds the
  /// leaf gradients into the bound parameter tensors. May be called more
  /// than once; each call recomputes node gradients from scratch.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* view = nullptr;
    Tensor* sink = nullptr;
    bool requires_grad = false;
    std::vector<double> grad;
    BackwardFn backward;
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  std::deque<Node> nodes_;
};

}  // namespace mtaw::num
