// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "aad/error.hpp"
#include "aad/params.hpp"
#include "aad/tensor.hpp"

namespace aad::nn {

/// Handle to a node of a Graph. Default-constructed handles are "none".
struct Var {
  int id = -1;
  bool valid() const noexcept { return id >= 0; }
};

/// Reverse-mode tape. Nodes are recorded in evaluation order; backward()
/// walks them in reverse and accumulates gradients into parents that
/// require them.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor<T> value) { return push(std::move(value), false, {}, {}); }

  /// A leaf whose gradient is tracked (inputs under gradient checks).
  Var leaf(Tensor<T> value) { return push(std::move(value), true, {}, {}); }

  /// Leaf bound to a named entry of a parameter set. Gradients are tracked
  /// only when `trainable`; they can be collected with param_grads().
  Var param(const ParamSet<T>& params, const std::string& name, bool trainable) {
    Var v = push(params.get(name), trainable, {}, {});
    Node& n = nodes_[v.id];
    n.owner = &params;
    n.param_name = name;
    return v;
  }

  /// Records an op result. The node requires a gradient iff any parent does.
  Var record(Tensor<T> value, std::vector<int> parents, BackwardFn fn) {
    bool req = false;
    for (int p : parents) req = req || nodes_[p].requires_grad;
    return push(std::move(value), req, std::move(parents), req ? std::move(fn) : BackwardFn{});
  }

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  const Tensor<T>& value(int id) const { return nodes_[id].value; }

  /// Gradient of the last backward() target with respect to `v`; zeros if
  /// nothing flowed into it.
  Tensor<T> grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.has_grad ? n.grad : Tensor<T>(n.value.shape());
  }

  /// Mutable gradient buffer for `id`, zero-initialized on first access.
  Tensor<T>& grad_ref(int id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
      n.grad = Tensor<T>(n.value.shape());
      n.has_grad = true;
    }
    return n.grad;
  }

  bool has_grad(int id) const { return nodes_[id].has_grad; }

  /// Backpropagates from a single-element output.
  void backward(Var out) {
    if (nodes_.at(out.id).value.size() != 1) {
      throw Error(ErrorCode::ShapeMismatch, "backward() needs a scalar output, got shape " +
                                                shape_string(nodes_[out.id].value.shape()));
    }
    if (!nodes_[out.id].requires_grad) return;
    grad_ref(out.id)[0] = T(1);
    for (int i = out.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.backward && n.has_grad) n.backward(*this, i);
    }
  }

  /// Gradients of every entry of `params` (zeros for entries not used or not
  /// trainable in this graph). Multiple uses of one entry are summed.
  ParamSet<T> param_grads(const ParamSet<T>& params) const {
    ParamSet<T> out = params.zeros_like();
    for (const Node& n : nodes_) {
      if (n.owner != &params || !n.has_grad) continue;
      Tensor<T>& g = out.get(n.param_name);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    return out;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<int> parents;
    BackwardFn backward;
    const ParamSet<T>* owner = nullptr;
    std::string param_name;
  };

  Var push(Tensor<T> value, bool req, std::vector<int> parents, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), {}, false, req, std::move(parents), std::move(fn), nullptr, {}});
    return Var{static_cast<int>(nodes_.size() - 1)};
  }

  // deque keeps node references stable while ops append.
  std::deque<Node> nodes_;
};

}  // namespace aad::nn
