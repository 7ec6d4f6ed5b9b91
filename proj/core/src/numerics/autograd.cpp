#include "hrm/numerics/autograd.hpp"

#include <unordered_set>

#include "hrm/error.hpp"

namespace hrm::num {

namespace {
thread_local bool t_grad_enabled = true;
}  // namespace

void Node::accumulate(const Tensor& g) {
  if (grad.empty()) {
    grad = g;
    return;
  }
  if (g.shape() != grad.shape()) {
    throw DimensionError(std::string("gradient shape mismatch in ") + op);
  }
  float* dst = grad.raw();
  const float* src = g.raw();
  for (std::size_t i = 0, n = grad.numel(); i < n; ++i) dst[i] += src[i];
}

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape());
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Var::grad() const {
  if (node_->grad.empty()) return Tensor(node_->value.shape());
  return node_->grad;
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Var make_result(Tensor value, std::vector<Var> inputs, const char* op,
                std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  if (t_grad_enabled) {
    bool any = false;
    for (const Var& v : inputs) any = any || v.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (Var& v : inputs) node->inputs.push_back(v.node());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Var(std::move(node));
}

Graph Graph::reachable_from(const Var& root) {
  Graph g;
  if (!root.defined()) return g;
  std::unordered_set<const Node*> seen;
  // Iterative post-order DFS so deep recurrent graphs cannot overflow the stack.
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      g.order.push_back(node);
      stack.pop_back();
    }
  }
  return g;
}

std::size_t Graph::op_count() const {
  std::size_t n = 0;
  for (const Node* node : order) n += node->backward_fn ? 1 : 0;
  return n;
}

void backward(const Var& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward requires a scalar loss");
  }
  if (!loss.requires_grad()) return;
  Graph g = Graph::reachable_from(loss);
  loss.node()->accumulate(Tensor(loss.shape(), 1.0f));
  for (auto it = g.order.rbegin(); it != g.order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  for (Node* node : g.order) {
    if (node->backward_fn) {
      node->backward_fn = nullptr;
      node->inputs.clear();
      node->grad = Tensor();
    }
  }
}

}  // namespace hrm::num
