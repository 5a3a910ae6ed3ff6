#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rvt/errors.hpp"

namespace rvt {

enum class Dtype { f32, f64 };

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

// One record of the computation graph. Nodes are linked output -> inputs, so
// a reverse pass is a walk from the loss node toward the leaves. `backprop`
// reads this node's accumulated gradient and adds each input's contribution
// into the parent nodes (captured by the closure).
template <typename T>
struct Node {
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(const std::vector<T>&)> backprop;  // empty for leaves
  std::vector<T> grad;  // lazily sized to the output's numel
  std::int64_t numel = 0;

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(static_cast<std::size_t>(numel), T(0));
    return grad;
  }
};

// Dense row-major n-dimensional array. Copies share the underlying buffer;
// kernels never mutate their inputs. A tensor without a node is a plain
// value and never accumulates gradient.
template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>, "Tensor is f32/f64 only");

 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<T>>(std::move(data))) {
    if (shape_numel(shape_) != static_cast<std::int64_t>(data_->size()))
      throw ShapeError("tensor data length " + std::to_string(data_->size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape),
                  std::vector<T>(static_cast<std::size_t>(n), T(0)));
  }

  static Tensor full(Shape shape, T v) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape),
                  std::vector<T>(static_cast<std::size_t>(n), v));
  }

  static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

  // Grad-tracked leaf (model parameter or attacked input).
  static Tensor leaf(Shape shape, std::vector<T> data) {
    Tensor t(std::move(shape), std::move(data));
    t.node_ = std::make_shared<Node<T>>();
    t.node_->numel = t.numel();
    return t;
  }

  static Tensor leaf_zeros(Shape shape) {
    auto n = shape_numel(shape);
    return leaf(std::move(shape),
                std::vector<T>(static_cast<std::size_t>(n), T(0)));
  }

  const Shape& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t numel() const {
    return data_ ? static_cast<std::int64_t>(data_->size()) : 0;
  }
  static constexpr Dtype dtype() {
    return std::is_same_v<T, float> ? Dtype::f32 : Dtype::f64;
  }

  bool defined() const { return static_cast<bool>(data_); }
  bool tracked() const { return static_cast<bool>(node_); }

  const T* data() const { return data_->data(); }
  T* data() { return data_->data(); }
  const std::vector<T>& vec() const { return *data_; }
  std::vector<T>& vec() { return *data_; }
  T item() const {
    if (numel() != 1) throw UsageError("item() on non-scalar tensor");
    return (*data_)[0];
  }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

  // Same data, no graph membership.
  Tensor detach() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = data_;
    return t;
  }

  Tensor clone() const {
    return Tensor(shape_, *data_);
  }

  // Gradient accumulated by the last backward() pass, as a detached tensor.
  Tensor grad() const {
    if (!node_) throw UsageError("grad() on a detached tensor");
    if (node_->grad.empty()) return Tensor::zeros(shape_);
    return Tensor(shape_, node_->grad);
  }

  void zero_grad() {
    if (node_) node_->grad.clear();
  }

  // Internal: attach a freshly built op node.
  void set_node(std::shared_ptr<Node<T>> n) { node_ = std::move(n); }

 private:
  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
  std::shared_ptr<Node<T>> node_;
};

namespace detail {

// Reverse topological order (children before parents), obtained by reversing
// an iterative DFS postorder from the loss node. Parent visit order is the
// op input order, which fixes the accumulation order and makes backward
// bitwise deterministic.
template <typename T>
std::vector<Node<T>*> reverse_topo(Node<T>* root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> done;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (done.count(node)) {
      stack.pop_back();
      continue;
    }
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (!done.count(p)) stack.emplace_back(p, 0);
    } else {
      done.insert(node);
      order.push_back(node);
      stack.pop_back();
    }
  }
  return {order.rbegin(), order.rend()};
}

}  // namespace detail

// Reverse-mode pass: seeds d(loss)/d(loss) = 1 and visits every reachable
// node exactly once in reverse topological order. Gradients accumulate
// additively across fan-out; leaves keep theirs for grad().
template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.tracked())
    throw UsageError("backward() called on a detached tensor");
  if (loss.numel() != 1)
    throw UsageError("backward() expects a scalar loss, got shape " +
                     shape_str(loss.shape()));
  Node<T>* root = loss.node().get();
  root->ensure_grad()[0] += T(1);
  for (Node<T>* n : detail::reverse_topo(root)) {
    if (n->backprop) n->backprop(n->ensure_grad());
  }
}

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

}  // namespace rvt
