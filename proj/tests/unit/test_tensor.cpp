#include <cmath>

#include "ctxda/errors.hpp"
#include "ctxda/rng.hpp"
#include "ctxda/tape.hpp"
#include "ctxda/tensor.hpp"
#include "doctest.h"

using namespace ctxda;

namespace {

Tensor2D random_tensor(std::size_t r, std::size_t c, Rng& rng) {
  Tensor2D t(r, c);
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("matmul examples") {
  CHECK(matmul(Tensor2D::identity(2), Tensor2D::from_rows({{3}, {4}})) ==
        Tensor2D::from_rows({{3}, {4}}));
  CHECK(matmul(Tensor2D::from_rows({{1, 2}, {3, 4}}), Tensor2D::from_rows({{0}, {0}})) ==
        Tensor2D::from_rows({{0}, {0}}));
  CHECK(matmul(Tensor2D::from_rows({{1, 2}, {3, 4}}), Tensor2D::from_rows({{5}, {6}})) ==
        Tensor2D::from_rows({{17}, {39}}));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  try {
    matmul(Tensor2D(2, 3), Tensor2D(2, 3));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }
}

TEST_CASE("matmul is associative on random triples") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_tensor(1 + rng.below(5), 1 + rng.below(5), rng);
    const auto b = random_tensor(a.cols(), 1 + rng.below(5), rng);
    const auto c = random_tensor(b.cols(), 1 + rng.below(5), rng);
    const auto left = matmul(matmul(a, b), c);
    const auto right = matmul(a, matmul(b, c));
    for (std::size_t k = 0; k < left.size(); ++k) {
      CHECK(relative_error(left[k], right[k], 1e-12) < 1e-9);
    }
  }
}

TEST_CASE("softmax examples") {
  const double zeros[] = {0, 0, 0, 0, 0};
  for (double p : softmax(zeros)) CHECK(p == doctest::Approx(0.2).epsilon(1e-15));

  const double two[] = {0.0, std::log(2.0)};
  const auto p = softmax(two);
  CHECK(p[0] == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(2.0 / 3).epsilon(1e-14));

  const double big[] = {1000, 1001};
  const double small[] = {0, 1};
  const auto pb = softmax(big);
  const auto ps = softmax(small);
  CHECK(std::isfinite(pb[0]));
  CHECK(std::abs(pb[0] - ps[0]) < 1e-12);
  CHECK(std::abs(pb[1] - ps[1]) < 1e-12);

  CHECK_THROWS_AS(softmax(std::span<const double>{}), UsageError);
}

TEST_CASE("softmax sums to one and is shift invariant") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng.below(50));
    for (double& x : v) x = rng.uniform(-30, 30);
    const auto p = softmax(v);
    double s = 0;
    for (double x : p) {
      CHECK(x > 0.0);
      s += x;
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
    const double c = rng.uniform(-100, 100);
    auto shifted = v;
    for (double& x : shifted) x += c;
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) < 1e-12);
  }
}

TEST_CASE("elementwise maps") {
  CHECK(tanh_map(Tensor2D(1, 1))(0, 0) == 0.0);
  CHECK(sigmoid_map(Tensor2D(1, 1))(0, 0) == 0.5);
  CHECK(tanh_map(Tensor2D(1, 1, 1.0))(0, 0) == doctest::Approx(0.7615941559557649).epsilon(1e-15));
  const auto t = tanh_map(Tensor2D::from_rows({{-50, 50}}));
  CHECK(t(0, 0) >= -1.0);
  CHECK(t(0, 1) <= 1.0);
}

TEST_CASE("tensor construction checks length") {
  CHECK_THROWS_AS(Tensor2D(2, 2, std::vector<double>{1, 2, 3}), DimensionError);
  Tensor2D t(2, 3);
  CHECK(t.size() == 6);
  CHECK(t.transposed().rows() == 3);
}

TEST_CASE("finite differences") {
  const auto fd = finite_difference_grad(
      [](const Tensor2D& x) { return x[0] * x[0]; }, Tensor2D(1, 1, 3.0), 1e-5);
  CHECK(std::abs(fd[0] - 6.0) < 1e-8);
  const auto flat =
      finite_difference_grad([](const Tensor2D&) { return 7.0; }, Tensor2D(2, 2, 1.0), 1e-5);
  for (double v : flat.values()) CHECK(v == 0.0);
}

TEST_CASE("relative error uses the floor") {
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
  CHECK(relative_error(1e-9, 0.0) == doctest::Approx(1e-3));
}

// ---------------------------------------------------------------------------
// Tape

TEST_CASE("backward of sum(W x)") {
  Parameter w("w", 2, 2);
  w.value = Tensor2D::from_rows({{0.3, -0.2}, {0.5, 0.1}});
  Tape tape;
  const Var y = tape.matmul(tape.parameter(w), tape.constant(Tensor2D::from_rows({{1}, {1}})));
  tape.backward(tape.sum(y));
  CHECK(w.grad == Tensor2D::from_rows({{1, 1}, {1, 1}}));
}

TEST_CASE("backward at a symmetric minimum is zero") {
  Parameter w("w", 1, 1);
  Tape tape;
  const Var t = tape.tanh(tape.parameter(w));
  tape.backward(tape.sum(tape.hadamard(t, t)));
  CHECK(w.grad(0, 0) == 0.0);
}

TEST_CASE("backward accumulates across calls and rejects bad roots") {
  Parameter w("w", 1, 1);
  w.value(0, 0) = 2.0;
  Tape tape;
  const Var y = tape.sum(tape.scale(tape.parameter(w), 3.0));
  tape.backward(y);
  tape.backward(y);
  CHECK(w.grad(0, 0) == 6.0);

  Tape empty;
  CHECK_THROWS_AS(empty.backward(Var{}), StateError);
  Tape t2;
  const Var m = t2.constant(Tensor2D(2, 2));
  CHECK_THROWS_AS(t2.backward(m), StateError);
}

TEST_CASE("tape ops match finite differences") {
  Rng rng(3);
  Parameter a("a", 3, 4);
  Parameter b("b", 4, 2);
  Parameter bias("bias", 3, 1);
  Parameter cw("c", 1, 2);
  for (Parameter* p : {&a, &b, &bias, &cw})
    for (double& v : p->value.values()) v = rng.uniform(-1, 1);
  const Tensor2D k = random_tensor(3, 2, rng);
  const int labels[] = {2, 0};

  auto build = [&](Tape& tape) {
    const Var x = tape.add_bias(tape.matmul(tape.parameter(a), tape.parameter(b)), tape.parameter(bias));
    const Var t = tape.hadamard(tape.tanh(x), tape.sigmoid(tape.add_constant(x, k)));
    const Var s = tape.scale_columns(tape.softmax_columns(t), tape.parameter(cw));
    const Var parts[] = {s, tape.row(t, 1)};
    const Var stacked = tape.concat_rows(parts);
    return tape.add(tape.softmax_cross_entropy(stacked, labels), tape.scale(tape.sum(s), 0.3));
  };

  {
    Tape tape;
    tape.backward(build(tape));
  }
  for (Parameter* p : {&a, &b, &bias, &cw}) {
    const auto fd = finite_difference_grad(
        [&](const Tensor2D& at) {
          const Tensor2D saved = p->value;
          p->value = at;
          Tape tape;
          const double v = tape.value(build(tape))(0, 0);
          p->value = saved;
          return v;
        },
        p->value, 1e-5);
    for (std::size_t i = 0; i < fd.size(); ++i) {
      CHECK(relative_error(p->grad[i], fd[i]) < 1e-6);
    }
  }
}

TEST_CASE("cross-entropy node clips at the floor") {
  Tape tape;
  const Var logits = tape.constant(Tensor2D::from_rows({{0.0}, {-100.0}}));
  const int labels[] = {1};
  const Var loss = tape.softmax_cross_entropy(logits, labels);
  CHECK(tape.value(loss)(0, 0) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("glorot init and bias detection") {
  Rng rng(1);
  Parameter w("layer.w", 10, 20);
  Parameter b("layer.b", 10, 1);
  Parameter* ps[] = {&w, &b};
  init_parameters(ps, rng);
  const double s = std::sqrt(6.0 / 30.0);
  bool nonzero = false;
  for (double v : w.value.values()) {
    CHECK(std::abs(v) <= s);
    nonzero |= v != 0.0;
  }
  CHECK(nonzero);
  for (double v : b.value.values()) CHECK(v == 0.0);
}

TEST_CASE("rng is reproducible and in range") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(a.below(7) == b.below(7));
  }
}
