#include "stcnn/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace stcnn {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int e : shape) {
    if (e <= 0) throw std::invalid_argument("tensor extent must be positive, got " + std::to_string(e));
    n *= e;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

std::span<double> Node::ensure_grad() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
  return grad;
}

std::span<double> BackwardCtx::grad_of(const NodePtr& parent) {
  if (sink && parent->is_leaf() && parent->requires_grad) {
    return sink->buffer_for(parent.get());
  }
  return parent->ensure_grad();
}

Tensor Tensor::leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw std::invalid_argument("leaf: shape " + shape_str(shape) + " does not match " +
                                std::to_string(values.size()) + " values");
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor::from_node(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = numel(shape);
  return leaf(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value) {
  const auto n = numel(shape);
  return leaf(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value), false);
}

Tensor Tensor::scalar(double value) { return leaf({1}, {value}, false); }

double Tensor::value() const {
  if (!node_ || node_->size() != 1) {
    throw std::invalid_argument("value(): tensor is not a scalar");
  }
  return node_->values[0];
}

std::span<double> GradSink::buffer_for(const Node* leaf) {
  auto it = buffers_.find(leaf);
  if (it == buffers_.end()) {
    it = buffers_.emplace(leaf, std::vector<double>(leaf->values.size(), 0.0)).first;
  }
  return it->second;
}

void GradSink::merge_into_nodes() {
  for (auto& [node, buf] : buffers_) {
    auto g = const_cast<Node*>(node)->ensure_grad();
    for (std::size_t i = 0; i < buf.size(); ++i) g[i] += buf[i];
  }
}

namespace {
thread_local int g_no_grad_depth = 0;
}

bool grad_enabled() { return g_no_grad_depth == 0; }

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

void backward(const Tensor& loss, GradSink* sink, double seed) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a defined scalar tensor");
  }
  Node* root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS over parents that participate in differentiation.
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  visited.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] += seed;
  BackwardCtx ctx{sink};
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n, ctx);
  }
}

namespace detail {

bool track(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> parents, BackwardFn fn) {
  if (numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw std::logic_error("make_op: shape/value mismatch");
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  bool needs = grad_enabled();
  if (needs) {
    needs = false;
    for (const Tensor& p : parents) {
      if (p.requires_grad()) {
        needs = true;
        break;
      }
    }
  }
  if (needs) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (Tensor& p : parents) n->parents.push_back(p.ptr());
    n->backward_fn = std::move(fn);
  }
  return Tensor::from_node(std::move(n));
}

}  // namespace detail
}  // namespace stcnn
