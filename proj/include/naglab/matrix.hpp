#pragma once

// Dense double-precision containers. Storage is column-major everywhere, so
// vec() is a reinterpretation of the buffer rather than a gather.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "naglab/errors.hpp"

namespace naglab {

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t len, double fill = 0.0) : data_(len, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t k) { return data_[k]; }
  double operator[](std::size_t k) const { return data_[k]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Vector& operator+=(const Vector& o) {
    check_same(o, "+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Vector& operator-=(const Vector& o) {
    check_same(o, "-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Vector& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Vector operator+(Vector a, const Vector& b) { return a += b; }
  friend Vector operator-(Vector a, const Vector& b) { return a -= b; }
  friend Vector operator*(Vector a, double s) { return a *= s; }
  friend Vector operator*(double s, Vector a) { return a *= s; }
  friend bool operator==(const Vector&, const Vector&) = default;

  Eigen::Map<Eigen::VectorXd> eigen() {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }
  Eigen::Map<const Eigen::VectorXd> eigen() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }

 private:
  void check_same(const Vector& o, const char* op) const {
    if (o.size() != size())
      throw DimensionError(std::string("vector ") + op + ": length " + std::to_string(size()) +
                           " vs " + std::to_string(o.size()));
  }

  std::vector<double> data_;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  /// Row-wise literal, e.g. Matrix::from_rows({{1, 2}, {3, 4}}).
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix out(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("from_rows: ragged row " + std::to_string(i));
      std::size_t j = 0;
      for (double v : row) out(i, j++) = v;
      ++i;
    }
    return out;
  }

  static Matrix from_col_major(std::size_t rows, std::size_t cols, std::vector<double> data) {
    if (data.size() != rows * cols)
      throw DimensionError("from_col_major: " + std::to_string(data.size()) + " entries for " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    Matrix out;
    out.rows_ = rows;
    out.cols_ = cols;
    out.data_ = std::move(data);
    return out;
  }

  static Matrix identity(std::size_t n) {
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
    return out;
  }

  static Matrix diagonal(std::initializer_list<double> diag) {
    Matrix out(diag.size(), diag.size());
    std::size_t i = 0;
    for (double v : diag) {
      out(i, i) = v;
      ++i;
    }
    return out;
  }

  static Matrix from_eigen(const Eigen::MatrixXd& m) {
    Matrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    out.eigen() = m;
    return out;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::string shape_string() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

  double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Matrix transposed() const {
    Matrix out(cols_, rows_);
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = 0; i < rows_; ++i) out(j, i) = (*this)(i, j);
    return out;
  }

  Matrix& operator+=(const Matrix& o) {
    check_same(o, "+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    check_same(o, "-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }
  friend bool operator==(const Matrix&, const Matrix&) = default;

  Eigen::Map<Eigen::MatrixXd> eigen() {
    return {data_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)};
  }
  Eigen::Map<const Eigen::MatrixXd> eigen() const {
    return {data_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)};
  }

 private:
  void check_same(const Matrix& o, const char* op) const {
    if (o.rows_ != rows_ || o.cols_ != cols_)
      throw DimensionError(std::string("matrix ") + op + ": " + shape_string() + " vs " +
                           o.shape_string());
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Ordered per-layer matrices (parameters, gradients, momentum buffers).
using LayerSet = std::vector<Matrix>;

inline Vector vec(const Matrix& a) { return Vector(a.values()); }

inline Matrix unvec(const Vector& v, std::size_t rows, std::size_t cols) {
  return Matrix::from_col_major(rows, cols, v.values());
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: " + a.shape_string() + " times " + b.shape_string());
  Matrix out(a.rows(), b.cols());
  if (a.cols() == 0) return out;
  out.eigen().noalias() = a.eigen() * b.eigen();
  return out;
}

/// a^T b without materializing the transpose.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows())
    throw DimensionError("matmul_tn: " + a.shape_string() + "^T times " + b.shape_string());
  Matrix out(a.cols(), b.cols());
  if (a.rows() == 0) return out;
  out.eigen().noalias() = a.eigen().transpose() * b.eigen();
  return out;
}

/// a b^T without materializing the transpose.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw DimensionError("matmul_nt: " + a.shape_string() + " times " + b.shape_string() + "^T");
  Matrix out(a.rows(), b.rows());
  if (a.cols() == 0) return out;
  out.eigen().noalias() = a.eigen() * b.eigen().transpose();
  return out;
}

inline Vector matvec(const Matrix& a, const Vector& v) {
  if (a.cols() != v.size())
    throw DimensionError("matvec: " + a.shape_string() + " times length " +
                         std::to_string(v.size()));
  Vector out(a.rows());
  if (a.cols() == 0) return out;
  out.eigen().noalias() = a.eigen() * v.eigen();
  return out;
}

/// Block (i, j) of the result is a(i, j) * b.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  const std::size_t r = b.rows();
  const std::size_t s = b.cols();
  Matrix out(a.rows() * r, a.cols() * s);
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double aij = a(i, j);
      if (aij == 0.0) continue;
      for (std::size_t q = 0; q < s; ++q)
        for (std::size_t p = 0; p < r; ++p) out(i * r + p, j * s + q) = aij * b(p, q);
    }
  return out;
}

/// W^j W^{j-1} ... W^i with 1-based layer indices; j = i - 1 yields the
/// identity on the space between layers i-1 and i.
inline Matrix chain_product(std::span<const Matrix> ws, std::size_t from, std::size_t to) {
  if (from == 0 || from > ws.size() + 1 || to > ws.size() || to + 1 < from)
    throw DimensionError("chain_product: range " + std::to_string(to) + ":" +
                         std::to_string(from) + " over " + std::to_string(ws.size()) + " layers");
  if (to + 1 == from) {
    const std::size_t n = from <= ws.size() ? ws[from - 1].cols() : ws.back().rows();
    return Matrix::identity(n);
  }
  Matrix acc = ws[from - 1];
  for (std::size_t l = from + 1; l <= to; ++l) acc = matmul(ws[l - 1], acc);
  return acc;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

inline double frobenius_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("frobenius_distance: " + a.shape_string() + " vs " + b.shape_string());
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a.values()[k] - b.values()[k];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double layers_norm(const LayerSet& ls) {
  double s = 0.0;
  for (const auto& m : ls) {
    const double f = frobenius_norm(m);
    s += f * f;
  }
  return std::sqrt(s);
}

}  // namespace naglab
