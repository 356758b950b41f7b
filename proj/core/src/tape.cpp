#include "ctxda/tape.hpp"

#include <algorithm>
#include <cmath>

#include "ctxda/errors.hpp"

namespace ctxda {

namespace {

constexpr double kProbFloor = 1e-12;

void require_same_shape(const Tensor2D& a, const Tensor2D& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + " shape mismatch: " + a.shape_string() +
                         " vs " + b.shape_string());
  }
}

// out += g * b^T, where g is (m x n), b is (k x n), out is (m x k).
void accumulate_g_bt(Tensor2D& out, const Tensor2D& g, const Tensor2D& b) {
  const std::size_t m = g.rows(), n = g.cols(), k = b.rows();
  auto gv = g.values();
  auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = gv.data() + i * n;
    double* orow = ov.data() + i * k;
    for (std::size_t j = 0; j < k; ++j) {
      const double* brow = bv.data() + j * n;
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) acc += grow[t] * brow[t];
      orow[j] += acc;
    }
  }
}

// out += a^T * g, where a is (m x k), g is (m x n), out is (k x n).
void accumulate_at_g(Tensor2D& out, const Tensor2D& a, const Tensor2D& g) {
  const std::size_t m = a.rows(), k = a.cols(), n = g.cols();
  auto av = a.values();
  auto gv = g.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = gv.data() + i * n;
    for (std::size_t r = 0; r < k; ++r) {
      const double air = av[i * k + r];
      if (air == 0.0) continue;
      double* orow = ov.data() + r * n;
      for (std::size_t t = 0; t < n; ++t) orow[t] += air * grow[t];
    }
  }
}

}  // namespace

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw StateError("variable does not belong to this tape");
  return nodes_[v.id];
}

Tensor2D& Tape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.value.same_shape(n.grad)) n.grad = Tensor2D(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::constant(Tensor2D value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.op = Op::kParameter;
  n.value = p.value;
  n.param = &p;
  return push(std::move(n));
}

const Tensor2D& Tape::value(Var v) const { return node(v).value; }

const Tensor2D& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.value.same_shape(n.grad)) throw StateError("no gradient recorded; call backward() first");
  return n.grad;
}

Var Tape::matmul(Var a, Var b) {
  Node n;
  n.op = Op::kMatmul;
  n.value = ctxda::matmul(node(a).value, node(b).value);
  n.a = a.id;
  n.b = b.id;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Tensor2D& av = node(a).value;
  const Tensor2D& bv = node(b).value;
  require_same_shape(av, bv, "add");
  Node n;
  n.op = Op::kAdd;
  n.value = av;
  n.value += bv;
  n.a = a.id;
  n.b = b.id;
  return push(std::move(n));
}

Var Tape::add_bias(Var a, Var bias) {
  const Tensor2D& av = node(a).value;
  const Tensor2D& bv = node(bias).value;
  if (bv.cols() != 1 || bv.rows() != av.rows()) {
    throw DimensionError("bias " + bv.shape_string() + " does not broadcast over " +
                         av.shape_string());
  }
  Node n;
  n.op = Op::kAddBias;
  n.value = av;
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) n.value(r, c) += bv(r, 0);
  n.a = a.id;
  n.b = bias.id;
  return push(std::move(n));
}

Var Tape::add_constant(Var a, const Tensor2D& c) {
  const Tensor2D& av = node(a).value;
  require_same_shape(av, c, "add_constant");
  Node n;
  n.op = Op::kAddConstant;
  n.value = av;
  n.value += c;
  n.a = a.id;
  return push(std::move(n));
}

Var Tape::hadamard(Var a, Var b) {
  const Tensor2D& av = node(a).value;
  const Tensor2D& bv = node(b).value;
  require_same_shape(av, bv, "hadamard");
  Node n;
  n.op = Op::kHadamard;
  n.value = av;
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] *= bv[i];
  n.a = a.id;
  n.b = b.id;
  return push(std::move(n));
}

Var Tape::scale_columns(Var a, Var w) {
  const Tensor2D& av = node(a).value;
  const Tensor2D& wv = node(w).value;
  if (wv.rows() != 1 || wv.cols() != av.cols()) {
    throw DimensionError("column weights " + wv.shape_string() + " do not match " +
                         av.shape_string());
  }
  Node n;
  n.op = Op::kScaleColumns;
  n.value = av;
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) n.value(r, c) *= wv(0, c);
  n.a = a.id;
  n.b = w.id;
  return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
  Node n;
  n.op = Op::kScale;
  n.value = node(a).value;
  for (double& v : n.value.values()) v *= factor;
  n.a = a.id;
  n.scalar = factor;
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::kTanh;
  n.value = tanh_map(node(a).value);
  n.a = a.id;
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::kSigmoid;
  n.value = sigmoid_map(node(a).value);
  n.a = a.id;
  return push(std::move(n));
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat_rows of nothing");
  const std::size_t cols = node(parts.front()).value.cols();
  std::size_t rows = 0;
  for (Var p : parts) {
    const Tensor2D& v = node(p).value;
    if (v.cols() != cols) throw DimensionError("concat_rows column mismatch: " + v.shape_string());
    rows += v.rows();
  }
  Node n;
  n.op = Op::kConcatRows;
  n.value = Tensor2D(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor2D& v = node(p).value;
    std::copy(v.values().begin(), v.values().end(), n.value.values().begin() + offset * cols);
    offset += v.rows();
    n.parts.push_back(p.id);
  }
  return push(std::move(n));
}

Var Tape::row(Var a, std::size_t r) {
  const Tensor2D& av = node(a).value;
  if (r >= av.rows()) throw DimensionError("row index out of range for " + av.shape_string());
  Node n;
  n.op = Op::kRow;
  auto src = av.row(r);
  n.value = Tensor2D(1, av.cols(), std::vector<double>(src.begin(), src.end()));
  n.a = a.id;
  n.scalar = static_cast<double>(r);
  return push(std::move(n));
}

Var Tape::softmax_columns(Var a) {
  const Tensor2D& av = node(a).value;
  Node n;
  n.op = Op::kSoftmaxColumns;
  n.value = Tensor2D(av.rows(), av.cols());
  for (std::size_t c = 0; c < av.cols(); ++c) {
    const auto p = softmax(av.column_values(c));
    for (std::size_t r = 0; r < av.rows(); ++r) n.value(r, c) = p[r];
  }
  n.a = a.id;
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  const Tensor2D& av = node(a).value;
  double total = 0.0;
  for (double v : av.values()) total += v;
  Node n;
  n.op = Op::kSum;
  n.value = Tensor2D(1, 1, total);
  n.a = a.id;
  return push(std::move(n));
}

Var Tape::softmax_cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor2D& lv = node(logits).value;
  if (labels.size() != lv.cols()) {
    throw DimensionError("cross-entropy: " + std::to_string(labels.size()) + " labels for " +
                         lv.shape_string() + " logits");
  }
  Node n;
  n.op = Op::kSoftmaxCrossEntropy;
  n.aux = Tensor2D(lv.rows(), lv.cols());
  double loss = 0.0;
  for (std::size_t c = 0; c < lv.cols(); ++c) {
    if (labels[c] < 0 || static_cast<std::size_t>(labels[c]) >= lv.rows()) {
      throw UsageError("label " + std::to_string(labels[c]) + " out of range");
    }
    const auto p = softmax(lv.column_values(c));
    for (std::size_t r = 0; r < lv.rows(); ++r) n.aux(r, c) = p[r];
    loss -= std::log(std::max(p[static_cast<std::size_t>(labels[c])], kProbFloor));
  }
  n.value = Tensor2D(1, 1, loss / static_cast<double>(lv.cols()));
  n.a = logits.id;
  n.labels.assign(labels.begin(), labels.end());
  return push(std::move(n));
}

void Tape::backward(Var root) {
  if (nodes_.empty()) throw StateError("backward() called before any forward computation");
  const Tensor2D& rv = node(root).value;
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw StateError("backward() root must be a scalar, got " + rv.shape_string());
  }
  for (Node& n : nodes_) n.grad = Tensor2D();
  grad_of(root.id)(0, 0) = 1.0;

  for (std::size_t id = root.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.value.same_shape(n.grad)) continue;  // not on a path to root
    const Tensor2D& g = n.grad;
    switch (n.op) {
      case Op::kConstant:
        break;
      case Op::kParameter:
        n.param->grad += g;
        break;
      case Op::kMatmul: {
        accumulate_g_bt(grad_of(n.a), g, nodes_[n.b].value);
        accumulate_at_g(grad_of(n.b), nodes_[n.a].value, g);
        break;
      }
      case Op::kAdd:
        grad_of(n.a) += g;
        grad_of(n.b) += g;
        break;
      case Op::kAddBias: {
        grad_of(n.a) += g;
        Tensor2D& gb = grad_of(n.b);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) gb(r, 0) += g(r, c);
        break;
      }
      case Op::kAddConstant:
        grad_of(n.a) += g;
        break;
      case Op::kHadamard: {
        const Tensor2D& av = nodes_[n.a].value;
        const Tensor2D& bv = nodes_[n.b].value;
        Tensor2D& ga = grad_of(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        Tensor2D& gb = grad_of(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        break;
      }
      case Op::kScaleColumns: {
        const Tensor2D& av = nodes_[n.a].value;
        const Tensor2D& wv = nodes_[n.b].value;
        Tensor2D& ga = grad_of(n.a);
        Tensor2D& gw = grad_of(n.b);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) {
            ga(r, c) += g(r, c) * wv(0, c);
            gw(0, c) += g(r, c) * av(r, c);
          }
        }
        break;
      }
      case Op::kScale: {
        Tensor2D& ga = grad_of(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.scalar * g[i];
        break;
      }
      case Op::kTanh: {
        Tensor2D& ga = grad_of(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
        break;
      }
      case Op::kSigmoid: {
        Tensor2D& ga = grad_of(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
        break;
      }
      case Op::kConcatRows: {
        std::size_t offset = 0;
        for (std::size_t part : n.parts) {
          Tensor2D& gp = grad_of(part);
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset * g.cols() + i];
          offset += gp.rows();
        }
        break;
      }
      case Op::kRow: {
        Tensor2D& ga = grad_of(n.a);
        const auto r = static_cast<std::size_t>(n.scalar);
        for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) += g(0, c);
        break;
      }
      case Op::kSoftmaxColumns: {
        Tensor2D& ga = grad_of(n.a);
        for (std::size_t c = 0; c < g.cols(); ++c) {
          double dot = 0.0;
          for (std::size_t r = 0; r < g.rows(); ++r) dot += g(r, c) * n.value(r, c);
          for (std::size_t r = 0; r < g.rows(); ++r) ga(r, c) += n.value(r, c) * (g(r, c) - dot);
        }
        break;
      }
      case Op::kSum: {
        Tensor2D& ga = grad_of(n.a);
        for (double& v : ga.values()) v += g(0, 0);
        break;
      }
      case Op::kSoftmaxCrossEntropy: {
        Tensor2D& ga = grad_of(n.a);
        const double w = g(0, 0) / static_cast<double>(n.aux.cols());
        for (std::size_t c = 0; c < n.aux.cols(); ++c) {
          const auto label = static_cast<std::size_t>(n.labels[c]);
          if (n.aux(label, c) < kProbFloor) continue;  // clipped: loss is flat here
          for (std::size_t r = 0; r < n.aux.rows(); ++r) {
            ga(r, c) += w * (n.aux(r, c) - (r == label ? 1.0 : 0.0));
          }
        }
        break;
      }
    }
  }
}

}  // namespace ctxda
