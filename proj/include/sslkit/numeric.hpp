#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace sslkit {

// Dense row-major matrix of 64-bit reals.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T without materializing the transpose.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
// Stacks the rows of `top` above the rows of `bottom`.
Matrix vstack(const Matrix& top, const Matrix& bottom);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
double log_sum_exp(std::span<const double> v);

// Max-subtracted softmax. Throws std::invalid_argument("empty logits").
std::vector<double> softmax(std::span<const double> logits);
// Row-wise softmax of `logits / temperature`.
Matrix softmax_rows(const Matrix& logits, double temperature = 1.0);

inline constexpr double kNormTolerance = 1e-12;

// Throws NumericalError("degenerate vector") when the norm is below kNormTolerance.
std::vector<double> l2_normalize(std::span<const double> v);
void l2_normalize_rows(Matrix& m);

// Backpropagates through u = r / ||r||: returns dL/dr given u, ||r|| and dL/du.
std::vector<double> l2_normalize_backward(std::span<const double> unit, double raw_norm,
                                          std::span<const double> grad_unit);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::pair<std::size_t, std::size_t> worst_coordinate{0, 0};
  double step = 0.0;
};

using ScalarFunction = std::function<double(std::span<const double>)>;

// Central-difference check of `analytic` against f at `point`. Relative error
// per coordinate uses max(|analytic|, |numeric|, 1e-8) as denominator.
// `cols` only shapes worst_coordinate into a (row, col) pair.
GradCheckReport finite_diff_check(const ScalarFunction& f, std::span<const double> analytic,
                                  std::span<const double> point, double step = 1e-5,
                                  std::size_t cols = 1);

}  // namespace sslkit
