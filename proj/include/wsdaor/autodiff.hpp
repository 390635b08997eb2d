#pragma once

// Reverse-mode automatic differentiation over dense tensors.
//
// A Tape owns every node created during one forward pass. Nodes are appended
// in creation order, which is a valid topological order, so backward() is a
// single reverse sweep. Values are computed eagerly; MIL frame selection reads
// them before the pooling node is built.

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "wsdaor/tensor.hpp"

namespace wsdaor::diff {

/// Inputs below this value are clamped before log().
inline constexpr double kLogFloor = 1e-12;

enum class OpKind {
  parameter,
  constant,
  affine,
  softmax_rows,
  grl,
  relu,
  sigmoid,
  log,
  square,
  add,
  subtract,
  multiply,
  scale,
  sum,
  mean,
  pool_rows,
};

std::string_view op_name(OpKind kind) noexcept;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Called with the tape and the node id whose gradient is being pushed to
  /// its inputs.
  using Backprop = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is tracked.
  Var parameter(Tensor value);
  /// Leaf with no gradient.
  Var constant(Tensor value);

  /// Accumulates d(root)/d(node) into every node that requires a gradient.
  /// Gradients add onto whatever is already stored; call zero_gradients()
  /// between independent passes.
  void backward(Var root);
  void zero_gradients();

  std::size_t size() const noexcept { return nodes_.size(); }
  OpKind kind(Var v) const { return nodes_.at(v.id()).kind; }
  const std::vector<std::size_t>& inputs(Var v) const { return nodes_.at(v.id()).inputs; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const;

  // Op construction hooks. Used by the free functions below.
  Var record(OpKind kind, std::vector<Var> inputs, Tensor value, Backprop backprop);
  /// Gradient buffer of an input node; nullptr if that node needs no gradient.
  Tensor* grad_buffer(std::size_t id);

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backprop backprop;
  };

  void ensure_grads();

  std::vector<Node> nodes_;
};

Var affine(Var input, Var weights, Var bias);
Var softmax_rows(Var logits);
/// Identity forward; multiplies the incoming gradient by -lambda.
Var grl(Var input, double lambda);
Var relu(Var x);
Var sigmoid(Var x);
/// Natural log with inputs clamped to kLogFloor. Clamped entries pass no gradient.
Var log(Var x);
Var square(Var x);
Var add(Var a, Var b);
Var subtract(Var a, Var b);
Var multiply(Var a, Var b);
Var scale(Var x, double factor);
Var sum(Var x);
Var mean(Var x);
/// Output row g is the mean of the input rows listed in groups[g].
Var pool_rows(Var x, const std::vector<std::vector<std::size_t>>& groups);

}  // namespace wsdaor::diff
