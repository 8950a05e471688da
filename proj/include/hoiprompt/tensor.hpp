#pragma once

// Reverse-mode differentiable 2-D tensors over Eigen matrices.
//
// A Tensor is a shared handle to a graph node. Every op creates a new node
// whose backward closure accumulates into its parents. Nodes that do not
// depend on any requires_grad leaf carry no closure and no parent links, so
// constant paths (frozen features, fixtures) never receive gradients.

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hoi {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

/// Raised when operand shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for invalid static configuration (heads, layer counts, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an API precondition is violated (non-scalar loss, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

std::string shape_string(Index rows, Index cols);

namespace fault {
// Test-only hook: when the named op is armed, its backward rule emits the
// negated gradient. Used to prove the gradient checker catches wrong rules.
void arm(std::string_view op_name);
void disarm();
bool armed(std::string_view op_name);
}  // namespace fault

template <typename Scalar>
struct Node {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;  // empty until something flows into it
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix<Scalar>& delta) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
      grad = delta;
    } else {
      grad += delta;
    }
  }
};

template <typename Scalar>
class Tensor {
 public:
  using NodeType = Node<Scalar>;
  using MatrixType = Matrix<Scalar>;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<NodeType> node) : node_(std::move(node)) {}

  static Tensor constant(MatrixType value) { return leaf(std::move(value), false); }

  static Tensor leaf(MatrixType value, bool requires_grad) {
    auto node = std::make_shared<NodeType>();
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor scalar(Scalar v) {
    MatrixType m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
  }

  bool defined() const { return static_cast<bool>(node_); }
  const MatrixType& value() const { return node_->value; }
  /// Mutable access for optimizers and checkpoint loading; never call while a graph depending on it is alive.
  MatrixType& mutable_value() { return node_->value; }
  const MatrixType& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  std::array<Index, 2> shape() const { return {rows(), cols()}; }
  Scalar item() const {
    if (node_->value.size() != 1) throw ContractError("item() on non-scalar tensor " + shape_string(rows(), cols()));
    return node_->value(0, 0);
  }

  const std::shared_ptr<NodeType>& node() const { return node_; }

  /// Populates grad on every requires_grad node reachable from this scalar.
  void backward() const;

 private:
  std::shared_ptr<NodeType> node_;
};

/// Builds a result node. `backward(self)` reads self.grad and accumulates into parents.
template <typename Scalar, typename Backward>
Tensor<Scalar> make_op(const char* op, Matrix<Scalar> value, std::initializer_list<Tensor<Scalar>> parents,
                       Backward&& backward) {
  auto node = std::make_shared<Node<Scalar>>();
  node->value = std::move(value);
  node->op = op;
  for (const auto& p : parents) {
    if (p.requires_grad()) {
      node->requires_grad = true;
      break;
    }
  }
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::forward<Backward>(backward);
  }
  return Tensor<Scalar>(std::move(node));
}

template <typename Scalar>
Tensor<Scalar> make_op_n(const char* op, Matrix<Scalar> value, const std::vector<Tensor<Scalar>>& parents,
                         std::function<void(Node<Scalar>&)> backward) {
  auto node = std::make_shared<Node<Scalar>>();
  node->value = std::move(value);
  node->op = op;
  for (const auto& p : parents) {
    if (p.requires_grad()) {
      node->requires_grad = true;
      break;
    }
  }
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor<Scalar>(std::move(node));
}

/// Sign applied to gradients emitted by `op` (-1 only under fault injection).
template <typename Scalar>
Scalar fault_sign(std::string_view op) {
  return fault::armed(op) ? Scalar(-1) : Scalar(1);
}

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace hoi
