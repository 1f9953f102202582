#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "mnagt/tensor.hpp"

namespace mnagt {

template <class T>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
/// lives.
template <class T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of one forward pass.
///
/// Nodes are appended in execution order, so the reverse of insertion order is
/// a valid topological order. A tape supports exactly one backward() until
/// zero_grad() is called.
template <class T>
class Tape {
 public:
  /// Called with the tape and the id of the node whose output gradient is
  /// available via grad_output(self). Must route contributions through
  /// accumulate().
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf node; participates in differentiation iff value.requires_grad().
  Var<T> leaf(Tensor<T> value);
  Var<T> constant(Tensor<T> value);

  /// Records an op result. `fn` is dropped when no input requires grad.
  Var<T> record(const char* op, Tensor<T> value,
                std::initializer_list<Var<T>> inputs, BackwardFn fn);
  Var<T> record(const char* op, Tensor<T> value, const std::vector<Var<T>>& inputs,
                BackwardFn fn);

  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const char* op_name(std::size_t id) const { return nodes_[id].op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient flowing into node `id` during backward.
  const Tensor<T>& grad_output(std::size_t id) const { return nodes_[id].grad; }

  /// Adds `contribution` to the gradient of `target` (no-op when the target
  /// does not require grad).
  void accumulate(Var<T> target, const Tensor<T>& contribution);

  /// Runs reverse-mode differentiation from a scalar loss.
  /// Throws AutodiffError on a non-scalar loss, a loss that does not depend
  /// on any grad-enabled leaf, or a second call without zero_grad().
  void backward(Var<T> loss);

  /// Gradient of a grad-enabled node after backward().
  const Tensor<T>& grad(Var<T> v) const;

  void zero_grad();

  bool backward_done() const noexcept { return backward_done_; }

 private:
  struct Node {
    const char* op = "leaf";
    Tensor<T> value;
    Tensor<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
  bool flip_current_ = false;
};

template <class T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <class T>
bool Var<T>::requires_grad() const {
  return tape_->requires_grad(id_);
}

namespace fault {

/// Test-only fault injection: negates every gradient contribution emitted by
/// the backward rule of the named ops. Used to prove that the verification
/// suites detect a broken rule. Not thread-safe.
void flip_backward_sign(std::vector<std::string> ops);
void clear();
bool is_flipped(std::string_view op);
bool any();

}  // namespace fault

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace mnagt
