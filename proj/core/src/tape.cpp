#include "mnagt/tape.hpp"

#include <algorithm>
#include <string>

namespace mnagt {

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace fault {
namespace {
std::vector<std::string>& flipped() {
  static std::vector<std::string> ops;
  return ops;
}
}  // namespace

void flip_backward_sign(std::vector<std::string> ops) { flipped() = std::move(ops); }
void clear() { flipped().clear(); }
bool any() { return !flipped().empty(); }
bool is_flipped(std::string_view op) {
  const auto& ops = flipped();
  return std::find(ops.begin(), ops.end(), op) != ops.end();
}
}  // namespace fault

template <class T>
Var<T> Tape<T>::leaf(Tensor<T> value) {
  Node node;
  node.requires_grad = value.requires_grad();
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <class T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  value.set_requires_grad(false);
  return leaf(std::move(value));
}

template <class T>
Var<T> Tape<T>::record(const char* op, Tensor<T> value,
                       std::initializer_list<Var<T>> inputs, BackwardFn fn) {
  return record(op, std::move(value), std::vector<Var<T>>(inputs), std::move(fn));
}

template <class T>
Var<T> Tape<T>::record(const char* op, Tensor<T> value,
                       const std::vector<Var<T>>& inputs, BackwardFn fn) {
  if (backward_done_) {
    throw AutodiffError(std::string("cannot record '") + op +
                        "' after backward(); call zero_grad() first");
  }
  Node node;
  node.op = op;
  for (const auto& in : inputs) {
    if (&in.tape() != this) throw AutodiffError("operands live on different tapes");
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  node.value = std::move(value);
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <class T>
void Tape<T>::accumulate(Var<T> target, const Tensor<T>& contribution) {
  Node& node = nodes_[target.id()];
  if (!node.requires_grad) return;
  if (contribution.size() != node.value.size()) {
    throw DimensionError("gradient contribution " +
                         shape_to_string(contribution.shape()) + " for node " +
                         shape_to_string(node.value.shape()));
  }
  if (!node.has_grad) {
    node.grad = Tensor<T>(node.value.shape());
    node.has_grad = true;
  }
  T* g = node.grad.data();
  const T* c = contribution.data();
  const std::size_t n = contribution.size();
  if (flip_current_) {
    for (std::size_t i = 0; i < n; ++i) g[i] -= c[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) g[i] += c[i];
  }
}

template <class T>
void Tape<T>::backward(Var<T> loss) {
  if (backward_done_) {
    throw AutodiffError("backward() already ran on this tape; call zero_grad() first");
  }
  Node& root = nodes_.at(loss.id());
  if (root.value.size() != 1) {
    throw AutodiffError("backward() needs a scalar loss, got shape " +
                        shape_to_string(root.value.shape()));
  }
  if (!root.requires_grad) {
    throw AutodiffError("loss does not depend on any grad-enabled leaf");
  }
  root.grad = Tensor<T>(root.value.shape(), T(1));
  root.has_grad = true;
  const bool faults = fault::any();
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.has_grad || !node.backward) continue;
    flip_current_ = faults && fault::is_flipped(node.op);
    node.backward(*this, i);
  }
  flip_current_ = false;
  for (auto& node : nodes_) {
    if (node.requires_grad && !node.has_grad) {
      node.grad = Tensor<T>(node.value.shape());
      node.has_grad = true;
    }
  }
  backward_done_ = true;
}

template <class T>
const Tensor<T>& Tape<T>::grad(Var<T> v) const {
  const Node& node = nodes_.at(v.id());
  if (!node.requires_grad) throw AutodiffError("node does not require grad");
  if (!backward_done_) throw AutodiffError("grad() requested before backward()");
  return node.grad;
}

template <class T>
void Tape<T>::zero_grad() {
  for (auto& node : nodes_) {
    node.grad = Tensor<T>();
    node.has_grad = false;
  }
  backward_done_ = false;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace mnagt
