#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "ctxda/tensor.hpp"

namespace ctxda {

/// Handle to a node on a Tape.
struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t id = kInvalid;
  bool valid() const noexcept { return id != kInvalid; }
};

// Records a forward computation so that reverse-mode gradients can be
// propagated back to the Parameters it read. A Tape is single-use per
// forward pass and is not thread-safe; separate tapes may read the same
// parameters concurrently, but backward() writes into Parameter::grad and
// must be serialized by the caller.
//
// Column-batched convention used by the models: a batch of B vectors of
// size n is an (n x B) tensor, one example per column.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Tensor2D value);
  /// Leaf bound to `p`; backward() accumulates into p.grad. `p` must outlive the tape.
  Var parameter(Parameter& p);

  const Tensor2D& value(Var v) const;
  /// Gradient of the last backward() root with respect to `v`.
  const Tensor2D& grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  /// a (r x c) + bias (r x 1) broadcast over columns.
  Var add_bias(Var a, Var bias);
  /// Elementwise a + c for a constant c (no gradient to c).
  Var add_constant(Var a, const Tensor2D& c);
  Var hadamard(Var a, Var b);
  /// Multiplies column j of a (r x c) by w(0, j), where w is (1 x c).
  Var scale_columns(Var a, Var w);
  Var scale(Var a, double factor);
  Var tanh(Var a);
  Var sigmoid(Var a);
  /// Vertical stack; all parts share a column count.
  Var concat_rows(std::span<const Var> parts);
  /// Row r of a, as a (1 x c) tensor.
  Var row(Var a, std::size_t r);
  /// Softmax down each column.
  Var softmax_columns(Var a);
  /// Sum of all entries, (1 x 1).
  Var sum(Var a);
  /// Mean over columns of -log(max(softmax(logits)[label_j, j], 1e-12)), (1 x 1).
  Var softmax_cross_entropy(Var logits, std::span<const int> labels);

  /// Propagates d(root)/d(node) through the tape and adds the parameter
  /// gradients into each bound Parameter::grad. `root` must be (1 x 1).
  /// Calling it again accumulates again.
  void backward(Var root);

 private:
  enum class Op {
    kConstant,
    kParameter,
    kMatmul,
    kAdd,
    kAddBias,
    kAddConstant,
    kHadamard,
    kScaleColumns,
    kScale,
    kTanh,
    kSigmoid,
    kConcatRows,
    kRow,
    kSoftmaxColumns,
    kSum,
    kSoftmaxCrossEntropy,
  };

  struct Node {
    Op op = Op::kConstant;
    Tensor2D value;
    Tensor2D grad;
    std::size_t a = Var::kInvalid;
    std::size_t b = Var::kInvalid;
    std::vector<std::size_t> parts;
    std::vector<int> labels;
    Tensor2D aux;  // cached probabilities for the cross-entropy node
    double scalar = 0.0;
    Parameter* param = nullptr;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  Tensor2D& grad_of(std::size_t id);

  std::vector<Node> nodes_;
};

}  // namespace ctxda
