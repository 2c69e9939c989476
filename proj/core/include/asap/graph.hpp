#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "asap/tensor.hpp"

namespace asap {

enum class Primitive : std::uint8_t {
  kConstant,
  kParameter,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kMulScalar,
  kRelu,
  kTanh,
  kMaximum,
  kPermuteCols,
  kConcatCols,
  kIndex,
  kSum,
  kMean,
  kSoftmax,
  kLogSoftmax,
  kCrossEntropy,
};

std::string_view primitive_name(Primitive p) noexcept;

class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Dynamic reverse-mode tape.
///
/// Nodes are appended in evaluation order, so the node vector is already a
/// topological order and backward walks it in reverse. The tape is rebuilt for
/// every forward pass. backward() consumes the tape: calling it a second time
/// throws, so parameter gradients are never double-accumulated.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to `p`; backward accumulates into p.grad.
  Var parameter(Parameter& p);

  Var matmul(Var a, Var b);
  /// Elementwise sum; `b` may also be a length-cols bias broadcast over rows.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  /// a * s where s holds a single value.
  Var mul_scalar(Var a, Var s);
  Var relu(Var a);
  Var tanh(Var a);
  /// Elementwise max; ties route the gradient to `a`.
  Var maximum(Var a, Var b);
  /// out[:, j] = a[:, perm[j]].
  Var permute_cols(Var a, std::vector<std::size_t> perm);
  Var concat_cols(const std::vector<Var>& parts);
  /// Single flat element as a scalar.
  Var index(Var a, std::size_t k);
  Var sum(Var a);
  Var mean(Var a);
  /// Row-wise along the last axis, max-subtracted.
  Var softmax(Var a);
  Var log_softmax(Var a);
  /// Mean negative log-likelihood of integer labels under row-wise logits.
  Var cross_entropy(Var logits, const std::vector<int>& labels);

  void backward(Var loss);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward() loss w.r.t. v; zeros if v did not influence it.
  Tensor grad(Var v) const;
  bool has_backward_run() const noexcept { return backward_done_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  Primitive kind(Var v) const;
  const std::vector<std::size_t>& inputs(Var v) const;

 private:
  struct Node {
    Primitive kind;
    Tensor value;
    std::vector<double> grad;
    std::vector<std::size_t> inputs;
    Parameter* param = nullptr;
    std::vector<std::size_t> aux_index;
    double aux_scalar = 0.0;
  };

  Var push(Node node);
  void check_owned(Var v, std::string_view op) const;
  std::vector<double>& grad_of(std::size_t id);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace asap
