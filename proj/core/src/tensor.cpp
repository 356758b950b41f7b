#include "ctxda/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>

#include "ctxda/errors.hpp"

namespace ctxda {

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw DimensionError("tensor of shape (" + std::to_string(rows) + "x" +
                         std::to_string(cols) + ") given " +
                         std::to_string(values_.size()) + " values");
  }
}

Tensor2D Tensor2D::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged rows in Tensor2D::from_rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor2D(r, c, std::move(values));
}

Tensor2D Tensor2D::column(std::span<const double> values) {
  return Tensor2D(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Tensor2D Tensor2D::identity(std::size_t n) {
  Tensor2D t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::string Tensor2D::shape_string() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

std::vector<double> Tensor2D::column_values(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void Tensor2D::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Tensor2D Tensor2D::transposed() const {
  Tensor2D t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Tensor2D::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor2D& Tensor2D::operator+=(const Tensor2D& other) {
  if (!same_shape(other)) {
    throw DimensionError("cannot add " + other.shape_string() + " to " + shape_string());
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul shape mismatch: " + a.shape_string() + " x " +
                         b.shape_string());
  }
  Tensor2D out(a.rows(), b.cols());
  const std::size_t n = a.cols();
  const std::size_t m = b.cols();
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  // i-k-j order keeps the inner loop contiguous in both b and out.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* orow = ov.data() + i * m;
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = av[i * n + k];
      if (aik == 0.0) continue;
      const double* brow = bv.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor2D tanh_map(const Tensor2D& t) {
  Tensor2D out = t;
  for (double& v : out.values()) v = std::tanh(v);
  return out;
}

Tensor2D sigmoid_map(const Tensor2D& t) {
  Tensor2D out = t;
  for (double& v : out.values()) v = sigmoid(v);
  return out;
}

std::vector<double> softmax(std::span<const double> v) {
  if (v.empty()) throw UsageError("softmax of an empty vector");
  const double mx = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

void glorot_uniform(Tensor2D& w, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (double& v : w.values()) v = rng.uniform(-s, s);
}

void init_parameters(std::span<Parameter* const> params, Rng& rng) {
  for (Parameter* p : params) {
    const auto dot = p->name.rfind('.');
    const std::string_view leaf =
        dot == std::string::npos ? std::string_view(p->name) : std::string_view(p->name).substr(dot + 1);
    if (!leaf.empty() && leaf.front() == 'b') {
      p->value.fill(0.0);
    } else {
      glorot_uniform(p->value, rng);
    }
  }
}

Tensor2D finite_difference_grad(const std::function<double(const Tensor2D&)>& f,
                                const Tensor2D& at, double h) {
  if (!(h > 0.0)) throw UsageError("finite-difference step must be positive");
  Tensor2D grad(at.rows(), at.cols());
  Tensor2D x = at;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double relative_error(double a, double b, double floor) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

}  // namespace ctxda
