#include "hoiprompt/tensor.hpp"

#include <unordered_set>
#include <utility>

namespace hoi {

std::string shape_string(Index rows, Index cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

namespace fault {
namespace {
std::string& armed_op() {
  static std::string op;
  return op;
}
}  // namespace

void arm(std::string_view op_name) { armed_op() = std::string(op_name); }
void disarm() { armed_op().clear(); }
bool armed(std::string_view op_name) { return !armed_op().empty() && armed_op() == op_name; }
}  // namespace fault

template <typename Scalar>
void Tensor<Scalar>::backward() const {
  if (!node_) throw ContractError("backward() on undefined tensor");
  if (node_->value.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got " + shape_string(rows(), cols()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<NodeType*> order;
  std::unordered_set<NodeType*> visited;
  std::vector<std::pair<NodeType*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodeType* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->accumulate(MatrixType::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeType* node = *it;
    if (!node->backward) continue;  // leaf
    if (node->grad.size() != 0) node->backward(*node);
    node->grad.resize(0, 0);
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace hoi
