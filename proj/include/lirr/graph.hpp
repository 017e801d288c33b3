#pragma once

// Tape-based reverse-mode differentiation over dense Tensors.
//
// A Graph records every operation in execution order, so node ids are a
// topological order by construction. Forward values are computed eagerly;
// backward() walks the tape once in reverse. Graphs own all their state and
// share nothing, so independent graphs can be used from different threads.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lirr/tensor.hpp"

namespace lirr {

/// Handle to a node recorded on a Graph.
struct Var {
  std::size_t id = 0;
  friend bool operator==(Var, Var) = default;
};

enum class OpKind : std::uint8_t {
  Constant,
  Parameter,
  MatMul,
  Add,
  AddRow,
  Sub,
  Mul,
  Scale,
  Relu,
  Tanh,
  Sigmoid,
  Softmax,
  ConcatCols,
  ConcatRows,
  Transpose,
  NormalizeRows,
  Sum,
  Mean,
  RowSum,
  GradReverse,
  SoftmaxCrossEntropy,
  SigmoidBce,
  L1Loss,
};

const char* op_name(OpKind op);

class Gradients;

class Graph {
 public:
  Graph() = default;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  const Tensor& value(Var v) const;
  double scalar(Var v) const;
  OpKind kind(Var v) const;
  bool is_parameter(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  Var matmul(Var a, Var b);
  /// Elementwise sum of equally shaped tensors.
  Var add(Var a, Var b);
  /// Adds a 1xC row vector to every row of an NxC tensor.
  Var add_row(Var a, Var row);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double k);
  Var relu(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  /// Row-wise softmax.
  Var softmax(Var a);
  Var concat_cols(Var a, Var b);
  Var concat_rows(Var a, Var b);
  Var transpose(Var a);
  /// Each row divided by (its L2 norm + eps).
  Var normalize_rows(Var a, double eps = 1e-12);
  Var sum(Var a);
  Var mean(Var a);
  /// NxC -> Nx1 row sums.
  Var row_sum(Var a);
  /// Identity forward; backward multiplies the incoming gradient by -lambda.
  Var grad_reverse(Var a, double lambda);

  /// Mean over rows of -log softmax(logits)[label].
  Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels);
  /// Mean binary cross-entropy of sigmoid(logits) against targets in [0, 1].
  Var sigmoid_bce(Var logits, std::span<const double> targets);
  /// Mean absolute error. The subgradient at a zero residual is 0.
  Var l1_loss(Var pred, Var target);

  /// Reverse pass from a 1x1 node. Every node receives an entry; nodes the
  /// loss does not depend on get zeros.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    OpKind op;
    std::size_t a = 0;
    std::size_t b = 0;
    double param = 0.0;
    std::vector<double> aux;
    Tensor value;
  };

  Var push(OpKind op, std::size_t a, std::size_t b, double param, Tensor value,
           std::vector<double> aux = {});
  const Node& node(Var v) const;
  void backprop_node(const Node& n, const Tensor& grad, std::vector<Tensor>& grads,
                     std::vector<char>& touched) const;

  std::vector<Node> nodes_;
};

/// Gradient of a scalar loss with respect to every node of a Graph.
class Gradients {
 public:
  explicit Gradients(std::vector<Tensor> grads) : grads_(std::move(grads)) {}

  const Tensor& operator[](Var v) const;
  std::size_t size() const noexcept { return grads_.size(); }

 private:
  std::vector<Tensor> grads_;
};

/// Dense product without graph recording; used by inference paths.
Tensor matmul(const Tensor& a, const Tensor& b);

}  // namespace lirr
