#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "hrm/numerics/tensor.hpp"

namespace hrm::num {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One recorded value in the dynamic graph. Leaves have no inputs and no
/// backward function; parameters are leaves with requires_grad set.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward_fn;

  /// Adds `g` into this node's gradient, allocating it on first use.
  void accumulate(const Tensor& g);
  /// Returns the gradient buffer, zero-allocated if absent.
  Tensor& grad_buffer();
};

/// Handle to a graph node. Copies alias the same node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  /// In-place access for optimizers and parameter loading.
  Tensor& value_mut() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t numel() const { return node_->value.numel(); }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient after backward; a zero tensor if nothing reached this node.
  Tensor grad() const;
  void zero_grad() const { node_->grad = Tensor(); }

  /// Leaf copy of the current value with no graph linkage.
  Var detach() const { return Var(node_->value, false); }

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// True unless a NoGradGuard is active on this thread.
bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds an op result. The node links to `inputs` only when recording is on
/// and at least one input requires a gradient.
Var make_result(Tensor value, std::vector<Var> inputs, const char* op,
                std::function<void(Node&)> backward_fn);

/// Topologically ordered view of every node reachable from a root (inputs
/// before consumers).
struct Graph {
  std::vector<Node*> order;

  static Graph reachable_from(const Var& root);
  std::size_t op_count() const;  // nodes with a backward function
};

/// Reverse-mode sweep from a scalar loss. Every reachable node with
/// requires_grad receives an additive gradient; the interior of the graph is
/// released afterwards. Throws UsageError for a non-scalar loss.
void backward(const Var& loss);

}  // namespace hrm::num
