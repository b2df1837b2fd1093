#include "cite/matrix.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>

#include "cite/error.hpp"

namespace cite {

namespace {

constexpr double kMinRowNorm = 1e-12;
constexpr double kDistributionTol = 1e-8;
constexpr double kMinQ = 1e-30;

void require_finite(const Matrix& m, const char* op) {
  if (!m.all_finite()) fail(ErrorCode::kNonFiniteValue, std::string(op) + " produced a non-finite entry");
}

void require_positive_tau(double tau) {
  if (!(tau > 0.0)) fail(ErrorCode::kNonPositiveTemperature, "tau must be > 0, got " + std::to_string(tau));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    fail(ErrorCode::kShapeMismatch, "data length " + std::to_string(data_.size()) + " != " +
                                        std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) fail(ErrorCode::kShapeMismatch, "ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

double Matrix::item() const {
  if (rows_ != 1 || cols_ != 1) fail(ErrorCode::kShapeMismatch, "item() on a non-scalar matrix");
  return data_[0];
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool bit_equal(const Matrix& a, const Matrix& b) noexcept {
  if (!a.same_shape(b)) return false;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(av[i]) != std::bit_cast<std::uint64_t>(bv[i])) return false;
  }
  return true;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) fail(ErrorCode::kShapeMismatch, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  return worst;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorCode::kDimMismatch, "matmul " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " * " +
                                      std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    fail(ErrorCode::kDimMismatch,
         "column counts differ: " + std::to_string(a.cols()) + " vs " + std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix l2_normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = out.row(r);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!(norm > kMinRowNorm)) fail(ErrorCode::kZeroRow, "row " + std::to_string(r) + " has norm <= 1e-12");
    for (double& v : row) v /= norm;
  }
  require_finite(out, "l2_normalize_rows");
  return out;
}

Matrix cosine_sim(const Matrix& image, const Matrix& text) {
  Matrix out = matmul_nt(image, text);
  require_finite(out, "cosine_sim");
  return out;
}

Matrix log_softmax_rows(const Matrix& scores, double tau) {
  require_positive_tau(tau);
  Matrix out(scores.rows(), scores.cols());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto in = scores.row(r);
    auto o = out.row(r);
    double mx = -INFINITY;
    for (double v : in) mx = std::max(mx, v / tau);
    double sum = 0.0;
    for (double v : in) sum += std::exp(v / tau - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t c = 0; c < in.size(); ++c) o[c] = in[c] / tau - lse;
  }
  require_finite(out, "log_softmax_rows");
  return out;
}

Matrix softmax_rows(const Matrix& scores, double tau) {
  require_positive_tau(tau);
  Matrix out(scores.rows(), scores.cols());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto in = scores.row(r);
    auto o = out.row(r);
    double mx = -INFINITY;
    for (double v : in) mx = std::max(mx, v / tau);
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] / tau - mx);
      sum += o[c];
    }
    for (double& v : o) v /= sum;
  }
  require_finite(out, "softmax_rows");
  return out;
}

double kl_divergence_rows(const Matrix& p, const Matrix& q) {
  if (!p.same_shape(q)) fail(ErrorCode::kShapeMismatch, "kl_divergence_rows: P and Q differ in shape");
  auto check_row = [](const Matrix& m, std::size_t r, const char* name) {
    double s = 0.0;
    for (double v : m.row(r)) {
      if (!(v >= 0.0) || !std::isfinite(v))
        fail(ErrorCode::kInvalidDistribution, std::string(name) + " row " + std::to_string(r) + " has a negative entry");
      s += v;
    }
    if (std::abs(s - 1.0) > kDistributionTol)
      fail(ErrorCode::kInvalidDistribution, std::string(name) + " row " + std::to_string(r) + " does not sum to 1");
  };
  double total = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    check_row(p, r, "P");
    check_row(q, r, "Q");
    for (std::size_t c = 0; c < p.cols(); ++c) {
      const double pv = p(r, c);
      if (pv == 0.0) continue;
      const double qv = q(r, c);
      if (qv < kMinQ) {
        fail(ErrorCode::kQZeroWherePPositive,
             "Q(" + std::to_string(r) + "," + std::to_string(c) + ") < 1e-30 where P > 0");
      }
      total += pv * std::log(pv / qv);
    }
  }
  return total;
}

}  // namespace cite
