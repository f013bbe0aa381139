#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "uda/tensor.hpp"

namespace uda {

/// One vertex of the reverse-mode graph. Leaves with requires_grad are
/// parameters; interior nodes carry a backward closure that pushes their
/// gradient into their parents.
struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor& grad_buffer();
};

/// Handle to a graph node with value semantics for the handle itself.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  /// Gradient accumulated by the last backward pass; zeros if none reached it.
  const Tensor& grad() const;
  void zero_grad();

  /// Reverse sweep from this scalar node with seed 1.
  void backward() const;

  double item() const { return node_->value.item(); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Create an interior node. The closure is kept only if any parent needs a
/// gradient.
Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

/// True while a NoGradGuard is alive: ops skip recording closures.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace uda
