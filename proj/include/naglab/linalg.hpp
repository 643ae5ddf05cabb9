#pragma once

// Spectral quantities. Singular values come from a direct SVD, which
// resolves small singular values to ~eps * sigma_max (the Gram route only
// reaches ~sqrt(eps) and would inflate numerical rank). spectral_norm
// switches to power iteration once the smaller side exceeds
// kDenseSpectralDim.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "naglab/errors.hpp"
#include "naglab/matrix.hpp"

namespace naglab {

inline constexpr std::size_t kDenseSpectralDim = 64;
inline constexpr double kPowerTolerance = 1e-10;
inline constexpr std::size_t kPowerIterationCap = 10000;

struct SingularExtremes {
  double max = 0.0;
  double min = 0.0;  // over min(rows, cols) singular values
  bool rank_deficient = false;
};

struct EigExtremes {
  double max = 0.0;
  double min = 0.0;
};

namespace detail {

inline double symmetry_defect(const Matrix& h) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t j = 0; j < h.cols(); ++j)
    for (std::size_t i = 0; i < h.rows(); ++i) {
      diff = std::max(diff, std::abs(h(i, j) - h(j, i)));
      scale = std::max(scale, std::abs(h(i, j)));
    }
  return scale == 0.0 ? 0.0 : diff / scale;
}

}  // namespace detail

inline bool is_symmetric(const Matrix& h, double rel_tol = 1e-10) {
  return h.rows() == h.cols() && detail::symmetry_defect(h) <= rel_tol;
}

/// Ascending eigenvalues of a symmetric matrix.
inline std::vector<double> sym_eigenvalues(const Matrix& h) {
  if (h.rows() != h.cols()) throw DimensionError("sym_eigenvalues: " + h.shape_string());
  if (!is_symmetric(h))
    throw ContractError("sym_eigenvalues: input not symmetric to 1e-10 relative");
  if (h.empty()) return {};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h.eigen(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("sym_eigenvalues: solver failed", 0.0);
  const auto& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

inline EigExtremes sym_eig_extremes(const Matrix& h) {
  if (h.empty()) throw ContractError("sym_eig_extremes: empty matrix");
  const auto ev = sym_eigenvalues(h);
  return {ev.back(), ev.front()};
}

/// Descending singular values, min(rows, cols) of them.
inline std::vector<double> singular_values(const Matrix& a) {
  if (a.empty()) throw ContractError("singular_values: empty matrix");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a.eigen());
  if (svd.info() != Eigen::Success) throw NumericError("singular_values: SVD failed", 0.0);
  const auto& sv = svd.singularValues();
  return {sv.data(), sv.data() + sv.size()};
}

inline SingularExtremes singular_extremes(const Matrix& a) {
  const auto sv = singular_values(a);
  SingularExtremes out{sv.front(), sv.back(), false};
  const double floor = static_cast<double>(std::max(a.rows(), a.cols())) *
                       std::numeric_limits<double>::epsilon() * out.max;
  out.rank_deficient = out.min <= floor;
  return out;
}

/// Largest and smallest singular values over the numerical rank
/// (values above rel_threshold * sigma_max).
inline SingularExtremes nonzero_singular_extremes(const Matrix& a, double rel_threshold = 1e-9) {
  const auto sv = singular_values(a);
  SingularExtremes out{sv.front(), 0.0, false};
  if (out.max == 0.0) throw ContractError("nonzero_singular_extremes: zero matrix has no rank");
  for (double s : sv)
    if (s > rel_threshold * out.max) out.min = s;
    else out.rank_deficient = true;
  return out;
}

inline std::size_t numerical_rank(const Matrix& a, double rel_threshold = 1e-9) {
  const auto sv = singular_values(a);
  if (sv.front() == 0.0) return 0;
  return static_cast<std::size_t>(
      std::count_if(sv.begin(), sv.end(), [&](double s) { return s > rel_threshold * sv.front(); }));
}

/// Largest singular value. Dense SVD when the smaller side is at most
/// kDenseSpectralDim, power iteration on a^T a beyond.
inline double spectral_norm(const Matrix& a, double tol = kPowerTolerance,
                            std::size_t max_iters = kPowerIterationCap) {
  if (a.empty()) throw ContractError("spectral_norm: empty matrix");
  if (std::min(a.rows(), a.cols()) <= kDenseSpectralDim) return singular_extremes(a).max;

  const auto m = a.eigen();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m.cols()) / std::sqrt(static_cast<double>(m.cols()));
  // Deterministic non-degenerate start: perturb the constant vector.
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) += 1e-3 * std::sin(static_cast<double>(k + 1));
  v.normalize();
  double estimate = 0.0;
  double change = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = m.transpose() * (m * v);
    const double rayleigh = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    change = std::abs(rayleigh - estimate) / std::max(rayleigh, std::numeric_limits<double>::min());
    estimate = rayleigh;
    if (it > 0 && change <= tol) return std::sqrt(std::max(0.0, estimate));
  }
  throw NumericError("spectral_norm: power iteration did not converge", change);
}

/// Orthonormal basis (rows x cols, cols <= rows) from the Householder QR of
/// a full-column-rank input.
inline Matrix orthonormal_columns(const Matrix& a) {
  if (a.cols() > a.rows())
    throw DimensionError("orthonormal_columns: need rows >= cols, got " + a.shape_string());
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a.eigen());
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.eigen().rows(), a.eigen().cols());
  return Matrix::from_eigen(q);
}

}  // namespace naglab
