#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stdn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Storage and graph record behind a Tensor handle.
///
/// A node created by a differentiable op keeps shared references to its
/// inputs and a closure that, given this node's grad, accumulates into the
/// inputs' grads. Nodes that do not require grad carry no graph at all.
template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> inputs;
  std::function<void(TensorNode&)> backward;

  bool is_leaf() const { return inputs.empty(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

/// N-dimensional row-major array with an optional gradient buffer.
///
/// Tensor is a shared handle: copies alias the same node. Values produced by
/// ops are never mutated afterwards; only leaves (parameters) are written by
/// optimizers through mutable_data().
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using Node = TensorNode<T>;

  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);
  static Tensor from_node(std::shared_ptr<Node> node);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const T> data() const;
  std::span<T> mutable_data();
  // Empty for tensors that have not taken part in a backward pass yet.
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  T item() const;

  bool requires_grad() const;
  void zero_grad();

  // Deep copy of the values with no graph attached.
  Tensor detach(bool requires_grad = false) const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Nodes reachable from a root, in topological order (inputs first).
///
/// replay() walks the order backwards so every node's closure runs exactly
/// once, after all of its consumers have deposited their contributions.
template <typename T>
class GradTape {
 public:
  static GradTape record(const Tensor<T>& root);

  std::span<TensorNode<T>* const> order() const { return order_; }

  // Zeroes interior grads, seeds the root with 1 and runs every closure.
  // Leaf grads are accumulated into, never reset.
  void replay() const;

 private:
  std::shared_ptr<TensorNode<T>> root_;
  std::vector<TensorNode<T>*> order_;
};

/// d(loss)/d(leaf) into every requires_grad leaf reachable from `loss`.
/// Calling it twice without zeroing leaf grads adds the two results.
template <typename T>
void backward(const Tensor<T>& loss);

// A parameter or stored array addressed by a stable name.
template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using ParamList = std::vector<NamedTensor<T>>;

namespace detail {

// Builds the output node of an op. The graph edge and closure are attached
// only if some input requires grad.
template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      std::vector<Tensor<T>> inputs,
                      std::function<void(TensorNode<T>&)> backward_fn);

template <typename T>
void require_finite(std::span<const T> values, const char* where);

}  // namespace detail

}  // namespace stdn
