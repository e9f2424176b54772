#pragma once

#include <atomic>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "agpad/errors.hpp"
#include "agpad/tensor.hpp"

namespace agpad {

// Toggle for the finiteness check every recorded op runs on its output.
// Non-finite values are an error state and must never propagate silently.
inline std::atomic<bool>& finite_checks() {
  static std::atomic<bool> enabled{true};
  return enabled;
}

template <typename Scalar>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  int id = -1;

  const Tensor<Scalar>& value() const { return tape->value(id); }
  const Shape& shape() const { return value().shape(); }
};

/// Reverse-mode gradient tape.
///
/// Ops append nodes in execution order, which is a topological order by
/// construction; backward() walks it in reverse and accumulates gradients
/// additively across fan-out. A tape is single-writer: record ops and run
/// backward from one execution context only. Reading values from a finished
/// tape is safe from anywhere.
template <typename Scalar>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor<Scalar>&)>;

  struct Node {
    Tensor<Scalar> value;
    bool requires_grad = false;
    BackwardFn backward;  // empty for leaves
  };

  Var<Scalar> leaf(Tensor<Scalar> value) {
    bool rg = value.requires_grad;
    return leaf(std::move(value), rg);
  }

  Var<Scalar> leaf(Tensor<Scalar> value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), requires_grad, BackwardFn{}});
    return Var<Scalar>{this, static_cast<int>(nodes_.size()) - 1};
  }

  Var<Scalar> record(const char* op_name, Tensor<Scalar> value,
                     bool requires_grad, BackwardFn backward) {
    if (finite_checks().load(std::memory_order_relaxed) && !value.all_finite()) {
      throw NumericError(std::string(op_name) + " produced non-finite values");
    }
    nodes_.push_back(Node{std::move(value), requires_grad,
                          requires_grad ? std::move(backward) : BackwardFn{}});
    return Var<Scalar>{this, static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor<Scalar>& value(int id) const {
    return nodes_[static_cast<std::size_t>(id)].value;
  }

  bool requires_grad(int id) const {
    return nodes_[static_cast<std::size_t>(id)].requires_grad;
  }

  std::size_t size() const { return nodes_.size(); }

  /// Backpropagate from a scalar root. Gradients for every node that
  /// requires grad are available through grad() afterwards.
  void backward(Var<Scalar> root) {
    if (root.value().size() != 1) {
      throw ShapeError("backward root must be a scalar, got " +
                       shape_string(root.value().shape()));
    }
    grads_.assign(nodes_.size(), Tensor<Scalar>{});
    accumulate(root.id, Tensor<Scalar>::full(root.value().shape(), Scalar(1)));
    for (int id = root.id; id >= 0; --id) {
      Node& node = nodes_[static_cast<std::size_t>(id)];
      if (!node.requires_grad || !node.backward) continue;
      if (grads_[static_cast<std::size_t>(id)].empty()) continue;
      node.backward(*this, grads_[static_cast<std::size_t>(id)]);
    }
  }

  /// Gradient of the last backward() root w.r.t. node `id` (zeros if the
  /// node was never reached).
  Tensor<Scalar> grad(int id) const {
    const Tensor<Scalar>& g = grads_[static_cast<std::size_t>(id)];
    if (g.empty()) return Tensor<Scalar>::zeros(value(id).shape());
    return g;
  }

  Tensor<Scalar> grad(Var<Scalar> v) const { return grad(v.id); }

  /// Add `g` into the gradient buffer of node `id`. No-op for nodes that do
  /// not require grad.
  void accumulate(int id, const Tensor<Scalar>& g) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    if (!node.requires_grad) return;
    Tensor<Scalar>& buf = grads_[static_cast<std::size_t>(id)];
    if (buf.empty()) {
      buf = g;
    } else {
      buf.array() += g.array();
    }
  }

 private:
  // deque: references returned by value() stay valid as nodes are appended
  std::deque<Node> nodes_;
  std::vector<Tensor<Scalar>> grads_;
};

}  // namespace agpad
