#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace stcnn {

using Shape = std::vector<int>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;

class GradSink;

/// Context handed to backward functions. Resolves where a parent's gradient
/// accumulates: into the node's own grad buffer, or, for shared parameter
/// leaves when a sink is active, into a per-worker buffer.
struct BackwardCtx {
  GradSink* sink = nullptr;
  std::span<double> grad_of(const NodePtr& parent);
};

using BackwardFn = std::function<void(Node&, BackwardCtx&)>;

/// One node of the reverse-mode graph. Holds the forward value, the gradient
/// buffer (allocated on first touch during backward), and the closure that
/// pushes this node's gradient into its parents.
struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  BackwardFn backward_fn;

  bool is_leaf() const { return !backward_fn; }
  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
  std::span<double> ensure_grad();
};

/// Value-semantic handle to a graph node. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t size() const { return node_->size(); }
  int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }

  std::span<const double> values() const { return node_->values; }
  std::span<double> mutable_values() { return node_->values; }
  double operator[](std::int64_t i) const { return node_->values[static_cast<std::size_t>(i)]; }

  /// Scalar convenience accessor; throws unless the tensor has exactly one element.
  double value() const;

  bool requires_grad() const { return node_->requires_grad; }
  /// Gradient buffer after a backward pass; empty span if never touched.
  std::span<const double> grad() const { return node_->grad; }

  Node* node() const { return node_.get(); }
  const NodePtr& ptr() const { return node_; }

  static Tensor from_node(NodePtr n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  NodePtr node_;
};

/// Per-worker gradient accumulator for data-parallel training. Backward
/// passes run with a sink route parameter-leaf gradients here instead of the
/// shared node, so read-only parameters can be used from several workers at
/// once. Buffers are merged by the caller in a fixed order.
class GradSink {
 public:
  std::span<double> buffer_for(const Node* leaf);

  /// Adds every buffer into the corresponding node's grad.
  void merge_into_nodes();

  bool empty() const { return buffers_.empty(); }
  void clear() { buffers_.clear(); }

 private:
  std::unordered_map<const Node*, std::vector<double>> buffers_;
};

bool grad_enabled();

/// Disables graph recording in scope (forward passes become plain evaluation).
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

/// Reverse-mode sweep from a scalar loss. Seeds d(loss)/d(loss) = seed and
/// accumulates exact gradients into every reachable node with requires_grad.
/// Throws if loss is not a scalar.
void backward(const Tensor& loss, GradSink* sink = nullptr, double seed = 1.0);

namespace detail {
/// True when outputs of an op over these inputs must record the graph.
bool track(std::initializer_list<const Tensor*> inputs);
Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
               BackwardFn fn);
}  // namespace detail

}  // namespace stcnn
