#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "ctxda/rng.hpp"

namespace ctxda {

/// Dense row-major matrix of doubles. Column vectors are (n x 1).
class Tensor2D {
 public:
  Tensor2D() = default;
  Tensor2D(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> values);

  /// Nested-list construction, e.g. Tensor2D::from_rows({{1, 2}, {3, 4}}).
  static Tensor2D from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor2D column(std::span<const double> values);
  static Tensor2D identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  bool same_shape(const Tensor2D& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_string() const;

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * cols_, cols_);
  }
  std::vector<double> column_values(std::size_t c) const;

  void fill(double v);
  Tensor2D transposed() const;
  bool all_finite() const noexcept;

  Tensor2D& operator+=(const Tensor2D& other);

  friend bool operator==(const Tensor2D&, const Tensor2D&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);
Tensor2D tanh_map(const Tensor2D& t);
Tensor2D sigmoid_map(const Tensor2D& t);

double sigmoid(double x);

/// Numerically stable softmax (max-subtracted). Throws UsageError on empty input.
std::vector<double> softmax(std::span<const double> v);

/// Trainable tensor with its accumulated gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, std::size_t rows, std::size_t cols)
      : name(std::move(name)), value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.fill(0.0); }

  std::string name;
  Tensor2D value;
  Tensor2D grad;
};

/// Glorot/Xavier uniform: U(-s, s), s = sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor2D& w, Rng& rng);

/// Glorot-uniform for weights, zeros for biases. A parameter is a bias when
/// the last dotted component of its name starts with 'b' (e.g. "out.b_y").
void init_parameters(std::span<Parameter* const> params, Rng& rng);

/// Central-difference estimate of df/dx at `at`, one coordinate at a time.
Tensor2D finite_difference_grad(const std::function<double(const Tensor2D&)>& f,
                                const Tensor2D& at, double h);

/// |a - b| / max(|a|, |b|, floor). The floor keeps near-zero gradients from
/// reporting huge relative errors caused by finite-difference noise.
double relative_error(double a, double b, double floor = 1e-6);

}  // namespace ctxda
