#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mdn/core/tensor.hpp"

namespace mdn {

namespace detail {
inline thread_local bool grad_enabled = true;
}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled; }

// Disables graph recording for the current thread while alive. Inference and
// entropy coding run under this guard.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_enabled) { detail::grad_enabled = false; }
  ~NoGradGuard() { detail::grad_enabled = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::string name;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  Tensor<T>& grad_ref() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

// Handle to a node of the computation graph. Copies share the node.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false, std::string name = {})
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
    node_->name = std::move(name);
  }
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool r) const { node_->requires_grad = r; }
  const std::string& name() const { return node_->name; }

  bool has_grad() const { return !node_->grad.empty(); }
  const Tensor<T>& grad() const { return node_->grad; }
  Tensor<T>& grad_ref() const { return node_->grad_ref(); }
  void zero_grad() const { node_->grad = Tensor<T>(); }

  T item() const { return node_->value.item(); }
  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Builds the result node of an operation. The backward closure is attached only
// when recording is enabled and some input requires a gradient.
template <typename T>
Var<T> make_result(Tensor<T> value, std::initializer_list<const Var<T>*> inputs,
                   std::function<void(Node<T>&)> backward) {
  Var<T> out(std::move(value));
  if (!grad_enabled()) return out;
  bool any = false;
  for (const Var<T>* in : inputs) any = any || in->requires_grad();
  if (!any) return out;
  Node<T>* node = out.node();
  node->requires_grad = true;
  for (const Var<T>* in : inputs) {
    if (in->requires_grad()) node->parents.push_back(in->shared());
  }
  node->backward = std::move(backward);
  return out;
}

template <typename T>
void accumulate(const Var<T>& v, const Tensor<T>& g) {
  auto& dst = v.grad_ref();
  require_same_shape(dst.shape(), g.shape(), "grad accumulate");
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

// Reverse-mode sweep from a scalar loss. Consumes the graph: interior nodes
// drop their closures afterwards, leaf gradients remain.
template <typename T>
void backward(const Var<T>& loss) {
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + loss.shape().str());
  }
  if (!loss.requires_grad()) return;

  // Owning references: clearing a node's parents below must not free nodes
  // that are still queued.
  std::vector<std::shared_ptr<Node<T>>> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<std::shared_ptr<Node<T>>, std::size_t>> stack;
  stack.emplace_back(loss.shared(), 0);
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.second < top.first->parents.size()) {
      std::shared_ptr<Node<T>> p = top.first->parents[top.second++];
      if (p->requires_grad && seen.insert(p.get()).second) stack.emplace_back(std::move(p), 0);
    } else {
      order.push_back(std::move(top.first));
      stack.pop_back();
    }
  }

  loss.node()->grad_ref().fill(T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = it->get();
    if (node->backward && !node->grad.empty()) node->backward(*node);
    if (node->backward) {
      node->backward = nullptr;
      node->parents.clear();
      if (node != loss.node()) node->grad = Tensor<T>();
    }
  }
}

}  // namespace mdn
