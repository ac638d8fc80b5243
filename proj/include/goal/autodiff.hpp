#pragma once

// Tape-based reverse-mode differentiation over goal::Tensor values.
//
// A Tape owns every intermediate value of one forward evaluation. Ops append
// nodes in execution order, so the node list is already topologically sorted
// and backward() is a single reverse sweep. Var is a cheap handle into a tape.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "goal/tensor.hpp"

namespace goal {

class Tape;

class Var {
 public:
  Var() = default;
  Tape* tape() const noexcept { return tape_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

class Tape {
 public:
  /// Backward rule: given the node's output value and output gradient,
  /// accumulates into the gradients of its inputs.
  using BackwardFn =
      std::function<void(Tape&, const Tensor& out, std::span<const double> grad_out)>;

  /// With `record == false` no backward rules are kept (inference mode).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value) { return push(std::move(value), false, {}); }
  Var leaf(Tensor value, bool requires_grad = true) {
    return push(std::move(value), requires_grad && record_, {});
  }

  /// Records an op result. `backward` runs only if some input needed grads.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  /// Reverse sweep from a scalar. Allowed once per tape.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  /// Gradient of the last backward() w.r.t. `v`; zeros if `v` was unreachable.
  Tensor grad(Var v) const;
  /// Mutable gradient buffer for use inside backward rules.
  std::span<double> grad_buffer(Var v);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool recording() const noexcept { return record_; }

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<double> grad;
    BackwardFn backward;
  };

  Var push(Tensor value, bool requires_grad, BackwardFn backward);
  Node& node(Var v);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  bool record_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Ops. All inputs of one op must live on the same tape.

Var matmul(Var a, Var b);
Var transpose(Var x);

// Elementwise. Binary ops accept equal shapes or one scalar operand.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var relu(Var x);
Var gelu(Var x);
Var exp(Var x);
Var log(Var x);
/// min(x, limit); gradient is zero where clamped.
Var clamp_max(Var x, double limit);

Var sum(Var x);
Var mean(Var x);

/// x[m×k]·w[k×n] + b[n]
Var linear(Var x, Var w, Var b);

/// Row softmax with max subtraction. `column_mask[j] == false` removes
/// column j: its probability is exactly zero.
Var softmax_rows(Var x, std::span<const bool> column_mask = {});
Var log_softmax_rows(Var x);

inline constexpr double kLayerNormEps = 1e-5;
/// Per-row normalization with population variance and kLayerNormEps.
Var layer_norm(Var x, Var gamma, Var beta);

inline constexpr double kNormFloor = 1e-12;
/// Rows with norm below kNormFloor are passed through unchanged.
Var l2_normalize_rows(Var x);

/// Mean of the selected rows of x[m×d], as a [d] vector.
Var mean_rows(Var x, std::span<const std::size_t> indices);
/// Gathers rows of x (duplicates allowed): result is |indices|×d.
Var select_rows(Var x, std::span<const std::size_t> indices);
/// Row i of a matrix as a [d] vector.
Var row(Var x, std::size_t i);
/// Rows [begin, end) as a matrix.
Var slice_rows(Var x, std::size_t begin, std::size_t end);
/// Columns [begin, end) as a matrix.
Var slice_cols(Var x, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
/// Stacks [d] vectors (or 1×d rows) into an n×d matrix.
Var stack_rows(std::span<const Var> rows);
/// Diagonal of a square matrix as a vector.
Var diag(Var x);

/// Plain (non-differentiable) helpers used by tests and inference code.
Tensor l2_normalize_rows(const Tensor& x);
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace goal
