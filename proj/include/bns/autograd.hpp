#pragma once

// Reverse-mode differentiation over Tensor values.
//
// Every op returns a Var whose node records its parents and a closure that
// pushes the node's gradient into them. backward() orders the reachable
// subgraph topologically and runs each closure once, in reverse. Nodes that
// do not depend on any requires_grad leaf are never recorded, so inference
// builds no graph.

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "bns/error.hpp"
#include "bns/tensor.hpp"

namespace bns {

struct Node {
  Tensor value;
  Tensor grad;
  bool has_grad = false;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  const char* op = "leaf";

  Tensor& grad_buffer() {
    if (!has_grad) {
      grad = Tensor(value.shape(), 0.0);
      has_grad = true;
    }
    return grad;
  }
};

class Var {
 public:
  Var() : node_(std::make_shared<Node>()) {}

  explicit Var(Tensor value, bool requires_grad = false) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->has_grad; }

  /// Gradient after backward(); zeros when nothing flowed into this node.
  Tensor grad() const { return node_->has_grad ? node_->grad : Tensor(shape(), 0.0); }

  void zero_grad() {
    node_->grad = Tensor();
    node_->has_grad = false;
  }

  const std::shared_ptr<Node>& node() const { return node_; }

  double item() const { return value().item(); }

 private:
  std::shared_ptr<Node> node_;
};

inline Var constant(Tensor value) { return Var(std::move(value), false); }
inline Var parameter(Tensor value) { return Var(std::move(value), true); }

namespace detail {

inline void check_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op + " with shape " +
                       shape_string(t.shape()));
  }
}

/// Builds the output node of an op. The closure is recorded only if some
/// input requires a gradient.
inline Var make_result(Tensor value, std::vector<Var> inputs, const char* op,
                       std::function<void(Node&)> backward) {
  check_finite(value, op);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (auto& in : inputs) node->parents.push_back(in.node());
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

inline void accumulate(Node& target, std::span<const double> delta) {
  if (!target.requires_grad) return;
  auto g = target.grad_buffer().data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

}  // namespace detail

/// Accumulates d(loss)/d(leaf) into every reachable requires_grad leaf.
inline void backward(const Var& loss) {
  if (loss.value().size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  // iterative post-order DFS
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer().fill(0.0);
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->has_grad) {
      node->backward(*node);
      detail::check_finite(node->grad, node->op);
    }
  }
}

}  // namespace bns
