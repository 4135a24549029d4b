#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "sinenet/tensor.hpp"

namespace sinenet {

/// Reverse-mode tape node. Every operation produces a fresh node holding its
/// output value, links to its inputs, and a closure that pulls this node's
/// gradient back into the inputs' gradients.
///
/// Parameter nodes are long-lived leaves shared between per-sample graphs;
/// their grad buffers accumulate across samples until the optimizer consumes
/// them. Intermediate nodes die with the sample's root reference.
template <typename T>
struct Node {
  Tensor<T> val;
  std::vector<T> grad;  // same layout as val.data; allocated on first touch
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backprop;
  bool needs_grad = false;
  std::int64_t id = 0;
  std::string name;  // nonempty for parameters

  void ensure_grad() {
    if (grad.empty()) grad.assign(val.numel(), T(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
using Value = std::shared_ptr<Node<T>>;

template <typename T>
std::int64_t next_node_id() {
  static std::atomic<std::int64_t> counter{0};
  return ++counter;
}

/// Tape recording switch. While disabled, interior nodes skip gradient
/// tracking and drop parent links, so forward-only passes (rollout,
/// validation, diagnostics) free intermediates as soon as they go out of
/// scope instead of pinning the whole graph.
inline bool& grad_enabled() {
  thread_local bool on = true;
  return on;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_enabled()) { grad_enabled() = false; }
  ~NoGradGuard() { grad_enabled() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

/// Constant leaf (no gradient).
template <typename T>
Value<T> make_const(Tensor<T> v) {
  auto n = std::make_shared<Node<T>>();
  n->val = std::move(v);
  n->id = next_node_id<T>();
  return n;
}

/// Trainable leaf.
template <typename T>
Value<T> make_param(Tensor<T> v, std::string name) {
  auto n = std::make_shared<Node<T>>();
  n->val = std::move(v);
  n->needs_grad = true;
  n->name = std::move(name);
  n->id = next_node_id<T>();
  return n;
}

/// Interior node with a zero-initialized value of the given shape; the caller
/// fills val and, when needs_grad came out true, installs the backprop
/// closure. needs_grad is inherited from the parents.
template <typename T>
Value<T> make_node(std::vector<int> shape, std::vector<Value<T>> parents, std::string name) {
  auto n = std::make_shared<Node<T>>();
  n->val = Tensor<T>(std::move(shape));
  if (grad_enabled()) {
    for (const auto& p : parents)
      if (p->needs_grad) {
        n->needs_grad = true;
        break;
      }
  }
  if (n->needs_grad) n->parents = std::move(parents);
  n->name = std::move(name);
  n->id = next_node_id<T>();
  return n;
}

/// Reverse pass from a scalar root; seeds the root gradient with `seed` so a
/// batch mean can be formed by running per-sample backward passes with
/// seed = 1/batch. Node ids increase in creation order, so descending-id
/// order is a valid topological order of the tape.
template <typename T>
void backward(const Value<T>& root, T seed = T(1)) {
  if (root->val.numel() != 1) throw std::logic_error("backward: root must be scalar");
  if (!root->needs_grad) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents)
      if (p->needs_grad && seen.insert(p.get()).second) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->id > b->id; });

  root->ensure_grad();
  root->grad[0] += seed;
  for (Node<T>* n : order)
    if (n->backprop) n->backprop(*n);
}

}  // namespace sinenet
