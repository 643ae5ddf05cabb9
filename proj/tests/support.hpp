#pragma once

// Independent reference implementations for the unit and acceptance tests.
// Nothing here calls the library's product, gradient or gram code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "naglab/naglab.hpp"

namespace naglab::testing {

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

inline Matrix naive_identity_plus(const Matrix& w) {
  Matrix out = w;
  for (std::size_t i = 0; i < w.rows(); ++i) out(i, i) += 1.0;
  return out;
}

/// Forward map written straight from the model definitions.
inline Matrix naive_forward(const NetworkParams& p, const Matrix& X) {
  if (p.shape.arch == Arch::FC) {
    Matrix z = X;
    for (const auto& w : p.hidden) z = naive_matmul(w, z);
    const double denom = std::pow(static_cast<double>(p.shape.m), static_cast<double>(p.shape.L - 1)) *
                         static_cast<double>(p.shape.d_y);
    for (double& v : z.data()) v /= std::sqrt(denom);
    return z;
  }
  Matrix z = naive_matmul(p.A(), X);
  for (const auto& w : p.hidden) z = naive_matmul(naive_identity_plus(w), z);
  return naive_matmul(p.B(), z);
}

inline double naive_loss(const NetworkParams& p, const Matrix& X, const Matrix& Y) {
  const Matrix u = naive_forward(p, X);
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double d = u.values()[k] - Y.values()[k];
    s += d * d;
  }
  return 0.5 * s;
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double denom = std::max(frobenius_norm(b), 1e-300);
  return frobenius_distance(a, b) / denom;
}

inline double rel_diff(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

/// Central finite differences of the loss in every hidden-layer entry,
/// step h = rel_step * (1 + |w|).
inline LayerSet fd_gradients(const NetworkParams& p, const Matrix& X, const Matrix& Y,
                             double rel_step = 1e-5) {
  LayerSet out;
  for (std::size_t l = 0; l < p.hidden.size(); ++l) {
    Matrix g(p.hidden[l].rows(), p.hidden[l].cols());
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double h = rel_step * (1.0 + std::abs(p.hidden[l].values()[k]));
      NetworkParams plus = p, minus = p;
      plus.hidden[l].data()[k] += h;
      minus.hidden[l].data()[k] -= h;
      g.data()[k] = (naive_loss(plus, X, Y) - naive_loss(minus, X, Y)) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

/// Jacobian of vec(U) with respect to all hidden entries (layer-major,
/// column-major within a layer). U is affine in each single entry, so a
/// unit central difference is exact up to rounding.
inline Matrix jacobian(const NetworkParams& p, const Matrix& X) {
  const std::size_t rows = p.shape.d_y * X.cols();
  std::size_t cols = 0;
  for (const auto& w : p.hidden) cols += w.size();
  Matrix J(rows, cols);
  std::size_t c = 0;
  for (std::size_t l = 0; l < p.hidden.size(); ++l)
    for (std::size_t k = 0; k < p.hidden[l].size(); ++k, ++c) {
      NetworkParams plus = p, minus = p;
      plus.hidden[l].data()[k] += 1.0;
      minus.hidden[l].data()[k] -= 1.0;
      const Matrix d = naive_forward(plus, X) - naive_forward(minus, X);
      for (std::size_t r = 0; r < rows; ++r) J(r, c) = 0.5 * d.values()[r];
    }
  return J;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, GaussianSource& src, double sd = 1.0) {
  return gaussian_matrix(r, c, sd, src);
}

/// Random network with nonzero hidden layers for either architecture.
inline NetworkParams random_network(const NetworkShape& shape, std::uint64_t seed,
                                    double resnet_hidden_sd = 0.1) {
  if (shape.arch == Arch::FC) return init_fc_gaussian(shape, seed);
  NetworkParams p = init_resnet(shape, {}, seed);
  GaussianSource src(derive_seed(seed, 99));
  for (auto& w : p.hidden) w = gaussian_matrix(w.rows(), w.cols(), resnet_hidden_sd, src);
  return p;
}

/// Loose rank-preserving sample: d_x x n Gaussian data with W* and Y = W* X.
inline Dataset sample_dataset(std::size_t d_x, std::size_t d_y, std::size_t n, std::uint64_t seed) {
  GaussianSource src(seed);
  Dataset d;
  d.X = gaussian_matrix(d_x, n, 1.0, src);
  d.W_star = gaussian_matrix(d_y, d_x, 1.0, src);
  d.Y = naive_matmul(d.W_star, d.X);
  d.r = std::min(d_x, n);
  return d;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace naglab::testing
