#pragma once

// Define-by-run reverse-mode differentiation.
//
// A Tape records every op applied to its Vars in append order. Inputs of a
// node always precede it, so backward() is a single reverse sweep. Parameter
// leaves do not copy their tensor; gradients for them are accumulated
// straight into a sink (the tensor's own grad buffer or a GradientBuffer
// slot), which is what lets several tapes share one parameter set.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hsal/tensor.hpp"

namespace hsal {

class Tape;

/// Handle to a tape node.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  bool requires_grad() const;
};

enum class OpKind : std::uint8_t {
  Constant,
  Parameter,
  MatMul,
  MatMulNT,
  Add,
  Sub,
  Mul,
  Scale,
  Tanh,
  Relu,
  Sigmoid,
  Softmax,
  SegmentSoftmax,
  Concat,
  Gather,
  Sum,
  Mean,
  SegmentSum,
  SegmentMean,
  ScaleRows,
  Rotary,
  Reshape,
  SoftmaxBce,
};

std::string_view op_name(OpKind kind);

class Tape {
 public:
  /// Receives the upstream gradient of a node and adds into the gradients of
  /// its inputs. Entries of `input_grads` are empty for inputs that do not
  /// require gradients.
  using BackwardFn =
      std::function<void(const Tape&, std::span<const double> upstream,
                         std::span<const std::span<double>> input_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Non-owning leaf without gradient tracking; `value` must outlive the tape.
  Var reference(const Tensor& value);
  /// Leaf whose gradient accumulates into `param.mutable_grad()`.
  Var parameter(Tensor& param);
  /// Leaf whose gradient accumulates into `grad_sink` (same length as param).
  Var parameter(const Tensor& param, std::span<double> grad_sink);

  Var record(OpKind kind, std::vector<std::uint32_t> inputs, Tensor value,
             BackwardFn backward);

  /// Reverse sweep from a scalar loss. Intermediate gradients are recomputed
  /// from scratch on every call; parameter sinks accumulate.
  void backward(Var loss);

  const Tensor& value(std::uint32_t id) const;
  const Tensor& value(Var v) const { return value(v.id); }
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  OpKind kind(std::uint32_t id) const { return nodes_[id].kind; }
  const std::vector<std::uint32_t>& inputs(std::uint32_t id) const { return nodes_[id].inputs; }
  /// Gradient of the last backward() w.r.t. node `v` (empty if not tracked).
  std::span<const double> grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind kind = OpKind::Constant;
    std::vector<std::uint32_t> inputs;
    Tensor owned;
    const Tensor* external = nullptr;
    bool requires_grad = false;
    std::vector<double> grad;
    std::span<double> sink;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
};

// ---- ops ----------------------------------------------------------------
// Rank-1 tensors of length n are treated as 1 x n rows where a matrix is
// expected. There is no implicit broadcasting anywhere.

Var matmul(Var a, Var b);     // [m x k] * [k x n]
Var matmul_nt(Var a, Var b);  // [m x k] * [n x k]^T

enum class Elementwise { Add, Sub, Mul, Tanh, Relu, Sigmoid };
Var elementwise(Elementwise op, Var a, std::optional<Var> b = std::nullopt);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var scale(Var a, double factor);

/// Softmax over all entries, computed with max subtraction.
Var softmax(Var x);
/// Softmax within each group of entries sharing a segment id. Empty segments
/// produce nothing.
Var segment_softmax(Var x, std::span<const std::uint32_t> segment, std::size_t n_segments);

/// Same values, new shape of equal element count.
Var reshape(Var x, Shape shape);

/// Concatenation along the last axis; leading dimensions must agree.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);

/// Rows of `table` in index order. Backward scatter-adds (duplicates accumulate).
Var gather(Var table, std::span<const std::uint32_t> rows);

enum class Reduction { Sum, Mean };
/// axis 0 of an [r x c] matrix gives [c]; axis 1 gives [r]. A rank-1 input
/// only has axis 0 and reduces to [1].
Var reduce(Reduction op, Var x, std::size_t axis);

/// out[s] = sum of rows r of x with segment[r] == s. Segments with no rows are zero.
Var segment_sum(Var x, std::span<const std::uint32_t> segment, std::size_t n_segments);
/// Like segment_sum but divided by the row count; empty segments are zero.
Var segment_mean(Var x, std::span<const std::uint32_t> segment, std::size_t n_segments);

/// out[r, :] = w[r] * x[r, :] for x [n x d], w [n] or [n x 1].
Var scale_rows(Var x, Var w);

/// Rotates consecutive pairs of row r by angle theta_k * positions[r]
/// with theta_k = 10000^(-2k/d).
Var rotary(Var x, std::span<const double> positions);

/// Binary cross-entropy between softmax(scores) and the one-hot target,
/// summed over all entries. Probabilities are clamped to [1e-12, 1 - 1e-12].
Var softmax_bce(Var scores, std::size_t target);

}  // namespace hsal
