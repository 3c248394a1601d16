#ifndef SDIT_AUTODIFF_HPP
#define SDIT_AUTODIFF_HPP

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <utility>

#include "sdit/tensor.hpp"

namespace sdit {

/// Ownership groups for trainable tensors. A graph tracks gradients only for
/// the groups it was created with, which is how one optimizer step leaves the
/// other player's parameters untouched.
enum class ParamGroup : unsigned { generator = 1u, discriminator = 2u, classifier = 4u };

inline constexpr unsigned groups_none = 0u;
inline constexpr unsigned groups_all = 7u;

inline constexpr unsigned operator|(ParamGroup a, ParamGroup b) {
  return static_cast<unsigned>(a) | static_cast<unsigned>(b);
}

template <typename Scalar>
struct Parameter {
  std::string name;
  ParamGroup group = ParamGroup::generator;
  Tensor<Scalar> value;
  // Gradient accumulator, written by graphs that track this group.
  mutable Tensor<Scalar> grad;

  Parameter() = default;
  Parameter(std::string n, ParamGroup g, Shape s)
      : name(std::move(n)), group(g), value(s), grad(s) {}

  void zero_grad() const { grad.data.setZero(); }
};

template <typename Scalar>
class Graph;

/// Handle to a node on a Graph tape.
template <typename Scalar>
struct Var {
  Graph<Scalar>* graph = nullptr;
  std::size_t id = 0;

  const Tensor<Scalar>& value() const { return graph->value(id); }
  const Shape& shape() const { return graph->value(id).shape; }
  bool requires_grad() const { return graph->requires_grad(id); }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so walking the
/// tape backwards is a valid topological order.
template <typename Scalar>
class Graph {
 public:
  using Backward = std::function<void(const Tensor<Scalar>& out_grad)>;

  explicit Graph(unsigned tracked_groups = groups_all) : tracked_(tracked_groups) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<Scalar> constant(Tensor<Scalar> t) { return push(std::move(t), false); }
  Var<Scalar> input(Tensor<Scalar> t, bool requires_grad) {
    return push(std::move(t), requires_grad);
  }

  /// Leaf referring to a parameter. If the parameter's group is tracked,
  /// gradients accumulate directly into p.grad; the value is never copied.
  Var<Scalar> param(const Parameter<Scalar>& p) {
    Node node;
    node.value_ref = &p.value;
    node.requires_grad = (tracked_ & static_cast<unsigned>(p.group)) != 0;
    if (node.requires_grad) {
      if (!(p.grad.shape == p.value.shape)) p.grad = Tensor<Scalar>(p.value.shape);
      node.grad_ref = &p.grad;
    }
    nodes_.push_back(std::move(node));
    return {this, nodes_.size() - 1};
  }

  /// Appends an operation result. `backward` receives the node's output
  /// gradient and is invoked only if the node requires a gradient and
  /// received one.
  Var<Scalar> op(Tensor<Scalar> value, bool requires_grad, Backward backward) {
    Var<Scalar> v = push(std::move(value), requires_grad);
    if (requires_grad) nodes_[v.id].backward = std::move(backward);
    return v;
  }

  /// Attaches a backward function to an existing node, for ops whose
  /// gradient needs to read their own output.
  void op_backward(std::size_t id, Backward backward) {
    if (nodes_[id].requires_grad) nodes_[id].backward = std::move(backward);
  }

  const Tensor<Scalar>& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.value_ref ? *n.value_ref : n.value;
  }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  bool has_grad(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.grad_ref != nullptr || !n.grad.empty();
  }

  /// Gradient buffer for node `id`, allocated as zeros on first access.
  Tensor<Scalar>& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad_ref) return *n.grad_ref;
    if (n.grad.empty()) n.grad = Tensor<Scalar>(value(id).shape);
    return n.grad;
  }

  /// Seeds d(root)/d(root) = 1 and propagates through the tape.
  void backward(Var<Scalar> root) {
    if (value(root.id).size() != 1) throw DomainError("backward: root must be a scalar");
    if (!requires_grad(root.id)) return;
    grad(root.id).data.setConstant(Scalar(1));
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && has_grad(i)) n.backward(grad(i));
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<Scalar> value;
    const Tensor<Scalar>* value_ref = nullptr;
    Tensor<Scalar> grad;
    Tensor<Scalar>* grad_ref = nullptr;
    bool requires_grad = false;
    Backward backward;
  };

  Var<Scalar> push(Tensor<Scalar> t, bool requires_grad) {
    Node node;
    node.value = std::move(t);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return {this, nodes_.size() - 1};
  }

  unsigned tracked_;
  std::deque<Node> nodes_;
};

}  // namespace sdit

#endif  // SDIT_AUTODIFF_HPP
