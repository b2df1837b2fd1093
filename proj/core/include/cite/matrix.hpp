#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace cite {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix scalar(double v) { return Matrix(1, 1, v); }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  /// Only meaningful for 1x1 matrices.
  double item() const;

  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// True when shapes match and every entry has the same bit pattern
/// (distinguishes -0.0 from 0.0, unlike operator==).
bool bit_equal(const Matrix& a, const Matrix& b) noexcept;

double max_abs_diff(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);
Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// Rows scaled to unit Euclidean norm. Throws ZeroRowError when a row norm
/// is <= 1e-12.
Matrix l2_normalize_rows(const Matrix& m);

/// Pairwise dot products of row-normalized inputs; S(i, j) = <I_i, T_j>.
Matrix cosine_sim(const Matrix& image, const Matrix& text);

/// Row-wise exp(S / tau) / sum exp(S / tau), using row-max subtraction.
Matrix softmax_rows(const Matrix& scores, double tau);
Matrix log_softmax_rows(const Matrix& scores, double tau);

/// Sum over rows of KL(P_row || Q_row) with the 0 * log(0 / q) = 0 convention.
double kl_divergence_rows(const Matrix& p, const Matrix& q);

}  // namespace cite
