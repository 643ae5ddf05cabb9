#pragma once

// Residual dynamics of momentum training on deep linear networks.
//
// With xi_t = vec(U_t - Y) and H_0 the gram matrix at initialization, NAG
// training satisfies exactly
//
//   [xi_{t+1}; xi_t] = G [xi_t; xi_{t-1}] + [phi_hat_t + psi_t + iota_t; 0]
//
//   G = [(1+b)(I - eta H_0)   b(-I + eta H_0)]
//       [I                    0              ]
//
// where phi_hat collects the products of two or more momentum buffers,
// psi the momentum cross terms and iota the drift of H_t away from H_0.
// ResidualAuditor recomputes every term from raw iterates and checks that
// the identity closes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "naglab/errors.hpp"
#include "naglab/linalg.hpp"
#include "naglab/matrix.hpp"
#include "naglab/models.hpp"
#include "naglab/random.hpp"

namespace naglab {

inline constexpr std::size_t kGramCap = 512;
inline constexpr double kAuditTolerance = 1e-8;

struct GramMatrix {
  Matrix h;
  Arch arch = Arch::FC;
  std::size_t t = 0;
};

/// H = scale^2 sum_l (inputs_l^T inputs_l) kron (tops_l tops_l^T).
inline Matrix gram_from_view(const NetworkView& v, std::size_t cap = kGramCap) {
  const std::size_t d_y = v.output.rows();
  const std::size_t n = v.output.cols();
  if (d_y * n > cap)
    throw CapacityError("gram matrix of size " + std::to_string(d_y * n) + " exceeds cap " +
                        std::to_string(cap) + "; use GramOperator");
  Matrix h(d_y * n, d_y * n);
  for (std::size_t l = 0; l < v.effective.size(); ++l)
    h += kron(matmul_tn(v.inputs[l], v.inputs[l]), matmul_nt(v.tops[l], v.tops[l]));
  h *= v.scale * v.scale;
  return h;
}

inline GramMatrix gram_fc(const NetworkParams& p, const Matrix& X, std::size_t cap = kGramCap,
                          std::size_t t = 0) {
  if (p.shape.arch != Arch::FC) throw ContractError("gram_fc: network is not FC");
  if (p.shape.d_y * X.cols() > cap)
    throw CapacityError("gram_fc: d_y*n exceeds cap; use GramOperator");
  return {gram_from_view(make_view(p, X), cap), Arch::FC, t};
}

inline GramMatrix gram_res(const NetworkParams& p, const Matrix& X, std::size_t cap = kGramCap,
                           std::size_t t = 0) {
  if (p.shape.arch != Arch::ResNet) throw ContractError("gram_res: network is not RESNET");
  if (p.shape.d_y * X.cols() > cap)
    throw CapacityError("gram_res: d_y*n exceeds cap; use GramOperator");
  return {gram_from_view(make_view(p, X), cap), Arch::ResNet, t};
}

inline GramMatrix gram(const NetworkParams& p, const Matrix& X, std::size_t cap = kGramCap,
                       std::size_t t = 0) {
  return p.shape.arch == Arch::FC ? gram_fc(p, X, cap, t) : gram_res(p, X, cap, t);
}

/// Matrix-free H: H vec(R) = vec(scale^2 sum_l T_l R P_l) with
/// T_l = tops_l tops_l^T and P_l = inputs_l^T inputs_l.
class GramOperator {
 public:
  explicit GramOperator(const NetworkView& v)
      : d_y_(v.output.rows()), n_(v.output.cols()), scale2_(v.scale * v.scale) {
    for (std::size_t l = 0; l < v.effective.size(); ++l) {
      left_.push_back(matmul_nt(v.tops[l], v.tops[l]));
      right_.push_back(matmul_tn(v.inputs[l], v.inputs[l]));
    }
  }
  GramOperator(const NetworkParams& p, const Matrix& X) : GramOperator(make_view(p, X)) {}

  std::size_t dim() const noexcept { return d_y_ * n_; }

  Vector apply(const Vector& x) const {
    if (x.size() != dim())
      throw DimensionError("GramOperator: length " + std::to_string(x.size()) + " for dim " +
                           std::to_string(dim()));
    const Matrix r = unvec(x, d_y_, n_);
    Matrix acc(d_y_, n_);
    for (std::size_t l = 0; l < left_.size(); ++l) acc += matmul(matmul(left_[l], r), right_[l]);
    acc *= scale2_;
    return vec(acc);
  }

  /// Extreme eigenvalues by power iteration (lambda_max on H, lambda_min on
  /// lambda_max I - H).
  EigExtremes extremes(double tol = kPowerTolerance, std::size_t max_iters = kPowerIterationCap) const {
    const double top = power(0.0, tol, max_iters);
    const double shifted = power(top, tol, max_iters);
    return {top, top - shifted};
  }

 private:
  double power(double shift, double tol, std::size_t max_iters) const {
    Vector v(dim());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = 1.0 + 1e-3 * std::sin(static_cast<double>(k + 1));
    v *= 1.0 / v.norm();
    double estimate = 0.0;
    double change = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < max_iters; ++it) {
      Vector w = apply(v);
      if (shift != 0.0) w = v * shift - w;
      double rayleigh = 0.0;
      for (std::size_t k = 0; k < v.size(); ++k) rayleigh += v[k] * w[k];
      const double wn = w.norm();
      if (wn == 0.0) return 0.0;
      v = w * (1.0 / wn);
      change = std::abs(rayleigh - estimate) / std::max(std::abs(rayleigh), 1e-300);
      estimate = rayleigh;
      if (it > 0 && change <= tol) return estimate;
    }
    throw NumericError("GramOperator: power iteration did not converge", change);
  }

  std::size_t d_y_;
  std::size_t n_;
  double scale2_;
  LayerSet left_;
  LayerSet right_;
};

struct CompanionMatrix {
  Matrix g;
  double eta = 0.0;
  double beta = 0.0;
};

inline CompanionMatrix companion(const Matrix& h0, double eta, double beta) {
  if (h0.rows() != h0.cols()) throw DimensionError("companion: H is " + h0.shape_string());
  if (!(eta > 0.0)) throw ContractError("companion: eta must be > 0");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ContractError("companion: beta must lie in [0, 1]");
  const std::size_t n = h0.rows();
  Matrix g(2 * n, 2 * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      const double a = (i == j ? 1.0 : 0.0) - eta * h0(i, j);
      g(i, j) = (1.0 + beta) * a;
      g(i, n + j) = -beta * a;
    }
  for (std::size_t i = 0; i < n; ++i) g(n + i, i) = 1.0;
  return {std::move(g), eta, beta};
}

inline CompanionMatrix companion(const GramMatrix& h0, double eta, double beta) {
  return companion(h0.h, eta, beta);
}

struct PerturbationBreakdown {
  Vector phi_hat;
  Vector psi;
  Vector iota;
  Vector aggregate;
  std::size_t t = 0;
};

struct AuditResult {
  PerturbationBreakdown breakdown;
  double identity_residual = 0.0;  // ||xi_{t+1} - (G pair)_top - aggregate||
  double lower_block_residual = 0.0;
};

namespace detail {

inline Vector stack(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

}  // namespace detail

class ResidualAuditor {
 public:
  ResidualAuditor(const NetworkParams& w0, Matrix X, Matrix Y, double eta, double beta,
                  double tol = kAuditTolerance, std::size_t cap = kGramCap)
      : X_(std::move(X)), Y_(std::move(Y)), eta_(eta), beta_(beta), tol_(tol), cap_(cap) {
    h0_ = gram_from_view(make_view(w0, X_), cap_);
    g_ = companion(h0_, eta_, beta_).g;
  }

  const Matrix& h0() const noexcept { return h0_; }
  const Matrix& companion_matrix() const noexcept { return g_; }
  double tolerance() const noexcept { return tol_; }

  /// Decomposes step t -> t+1 given the iterates w_{t-1}, w_t, w_{t+1}
  /// (pass w_0 as prev at t = 0). Throws AuditError when the identity
  /// residual exceeds tol * (1 + ||xi_{t+1}||).
  AuditResult audit(std::size_t t, const NetworkParams& prev, const NetworkParams& cur,
                    const NetworkParams& next) const {
    const NetworkView vp = make_view(prev, X_);
    const NetworkView vc = make_view(cur, X_);
    const Matrix u_next = forward(next, X_);
    const double scale = vc.scale;
    const std::size_t L = vc.effective.size();

    const Vector xi_prev = vec(vp.output - Y_);
    const Vector xi_cur = vec(vc.output - Y_);
    const Vector xi_next = vec(u_next - Y_);

    LayerSet moment(L);
    for (std::size_t l = 0; l < L; ++l) moment[l] = next.hidden[l] - cur.hidden[l];

    // phi_hat: Out [prod_l (E^l + M^l) - E^{L:1} - sum_l E^{L:l+1} M^l E^{l-1:1}] In X.
    Matrix z = vc.inputs[0];
    for (std::size_t l = 0; l < L; ++l) z = matmul(vc.effective[l] + moment[l], z);
    Matrix phi = matmul(vc.tops[L - 1], z) * scale - vc.output;
    for (std::size_t l = 0; l < L; ++l)
      phi -= matmul(vc.tops[l], matmul(moment[l], vc.inputs[l])) * scale;

    // psi, momentum cross terms. With D^l = W^l_t - W^l_{t-1},
    //   (L-1) b E_t^{L:1} + b E_{t-1}^{L:1} - b sum_l E_t^{L:l+1} E_{t-1}^l E_t^{l-1:1}
    //     = b sum_l E_t^{L:l+1} D^l E_t^{l-1:1} - b (E_t^{L:1} - E_{t-1}^{L:1}),
    // which vanishes exactly when w_{t-1} = w_t.
    Matrix psi = (vc.output - vp.output) * (-beta_);
    const LayerSet g_prev = layer_gradients(vp, Y_);
    Matrix transport(vc.output.rows(), vc.output.cols());
    for (std::size_t l = 0; l < L; ++l) {
      const Matrix d = cur.hidden[l] - prev.hidden[l];
      psi += matmul(vc.tops[l], matmul(d, vc.inputs[l])) * (beta_ * scale);
      transport += matmul(vc.tops[l], matmul(g_prev[l], vc.inputs[l]));
      transport -= matmul(vp.tops[l], matmul(g_prev[l], vp.inputs[l]));
    }
    psi += transport * (eta_ * beta_ * scale);

    // iota = -eta(1+b)(H_t - H_0) xi_t + eta b (H_{t-1} - H_0) xi_{t-1}.
    const Matrix h_cur = gram_from_view(vc, cap_);
    const Matrix h_prev = gram_from_view(vp, cap_);
    Vector iota = matvec(h_cur - h0_, xi_cur) * (-eta_ * (1.0 + beta_)) +
                  matvec(h_prev - h0_, xi_prev) * (eta_ * beta_);

    AuditResult out;
    out.breakdown.t = t;
    out.breakdown.phi_hat = vec(phi);
    out.breakdown.psi = vec(psi);
    out.breakdown.iota = std::move(iota);
    out.breakdown.aggregate = out.breakdown.phi_hat + out.breakdown.psi + out.breakdown.iota;

    const std::size_t dim = xi_cur.size();
    const Vector linear = matvec(g_, detail::stack(xi_cur, xi_prev));
    Vector direct(dim);
    double lower = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      direct[k] = xi_next[k] - linear[k];
      lower = std::max(lower, std::abs(xi_cur[k] - linear[dim + k]));
    }
    out.identity_residual = (direct - out.breakdown.aggregate).norm();
    out.lower_block_residual = lower;
    if (!(out.identity_residual <= tol_ * (1.0 + xi_next.norm())) || lower != 0.0)
      throw AuditError(t, out.identity_residual);
    return out;
  }

 private:
  Matrix X_;
  Matrix Y_;
  double eta_;
  double beta_;
  double tol_;
  std::size_t cap_;
  Matrix h0_;
  Matrix g_;
};

struct TraceStep {
  std::size_t t = 0;
  Vector xi;
  double xi_norm = 0.0;
  double pair_norm = 0.0;  // ||[xi_t; xi_{t-1}]||, xi_{-1} = xi_0
  double loss = 0.0;
  std::vector<double> layer_drift;  // ||W^l_t - W^l_0||_F
  double max_layer_drift = 0.0;
  std::optional<PerturbationBreakdown> breakdown;
  std::optional<double> identity_residual;
  double theory_envelope = 0.0;
};

struct ResidualPairTrace {
  std::vector<TraceStep> steps;
};

/// Residual, pair norm, loss and drift of iterate w_t; prev_xi is xi_{t-1}
/// (nullptr at t = 0).
inline TraceStep trace_step(std::size_t t, const NetworkParams& w, const NetworkParams& w0,
                            const Matrix& X, const Matrix& Y, const Vector* prev_xi) {
  TraceStep s;
  s.t = t;
  const Matrix u = forward(w, X);
  s.xi = vec(u - Y);
  s.xi_norm = s.xi.norm();
  const double prev = prev_xi ? prev_xi->norm() : s.xi_norm;
  s.pair_norm = std::sqrt(s.xi_norm * s.xi_norm + prev * prev);
  s.loss = 0.5 * s.xi_norm * s.xi_norm;
  for (std::size_t l = 0; l < w.hidden.size(); ++l) {
    s.layer_drift.push_back(frobenius_distance(w.hidden[l], w0.hidden[l]));
    s.max_layer_drift = std::max(s.max_layer_drift, s.layer_drift.back());
  }
  return s;
}

/// Audits a stored NAG trajectory w_0, ..., w_T (T >= 1).
inline ResidualPairTrace residual_audit(const std::vector<NetworkParams>& trajectory,
                                        const Matrix& X, const Matrix& Y, double eta, double beta,
                                        double tol = kAuditTolerance) {
  if (trajectory.size() < 2) throw ContractError("residual_audit: need at least two iterates");
  const ResidualAuditor auditor(trajectory.front(), X, Y, eta, beta, tol);
  ResidualPairTrace trace;
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const Vector* prev_xi = t == 0 ? nullptr : &trace.steps.back().xi;
    TraceStep s = trace_step(t, trajectory[t], trajectory.front(), X, Y, prev_xi);
    if (t + 1 < trajectory.size()) {
      const auto& prev = trajectory[t == 0 ? 0 : t - 1];
      AuditResult a = auditor.audit(t, prev, trajectory[t], trajectory[t + 1]);
      s.breakdown = std::move(a.breakdown);
      s.identity_residual = a.identity_residual;
    }
    trace.steps.push_back(std::move(s));
  }
  return trace;
}

/// g(x, y) = 4x(1-y) - [(1+x)(1-y)]^2.
inline double momentum_discriminant(double x, double y) {
  const double q = (1.0 + x) * (1.0 - y);
  return 4.0 * x * (1.0 - y) - q * q;
}

struct PowerBoundConstants {
  double rho = 0.0;
  double c = 0.0;
};

/// rho = sqrt(b (1 - eta lmin)),
/// C = (2 b (1 - eta lmin) + 2) / sqrt(min{g(b, eta lmin), g(b, eta lmax)}).
inline PowerBoundConstants power_bound_constants(double lambda_min, double lambda_max, double eta,
                                                 double beta) {
  const double gmin = std::min(momentum_discriminant(beta, eta * lambda_min),
                               momentum_discriminant(beta, eta * lambda_max));
  if (!(gmin > 0.0))
    throw ContractError("power bound: g(beta, eta*lambda) must be positive, got " +
                        std::to_string(gmin));
  const double contraction = beta * (1.0 - eta * lambda_min);
  return {std::sqrt(contraction), (2.0 * contraction + 2.0) / std::sqrt(gmin)};
}

struct SpectralBoundReport {
  double rho = 0.0;
  double c = 0.0;
  double kappa_tilde = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double max_ratio = 0.0;      // max ||G^k v|| / (C rho^k ||v||)
  double max_violation = 0.0;  // max(0, max_ratio - 1)
  std::size_t worst_k = 0;
  std::size_t worst_trial = 0;
  std::size_t violations = 0;
  std::size_t checks = 0;
  double slack = 0.0;
  bool passed = false;
};

/// Checks ||G^k v|| <= C rho^k ||v|| (1 + slack) for k <= k_max over
/// `trials` random unit vectors. Requires H symmetric positive definite,
/// 0 < eta <= 1/lambda_max and (1 - sqrt(eta lmin))/(1 + sqrt(eta lmin)) <= beta < 1.
inline SpectralBoundReport power_bound_check(const Matrix& h, double eta, double beta,
                                             std::size_t k_max, std::size_t trials,
                                             std::uint64_t seed = 0, double slack = 1e-9) {
  const auto eig = sym_eig_extremes(h);
  if (!(eig.min > 0.0)) throw ContractError("power_bound_check: H is not positive definite");
  if (!(eta > 0.0 && eta * eig.max <= 1.0))
    throw ContractError("power_bound_check: need 0 < eta <= 1/lambda_max");
  const double root = std::sqrt(eta * eig.min);
  if (!(beta < 1.0 && beta >= (1.0 - root) / (1.0 + root)))
    throw ContractError("power_bound_check: need (1-sqrt(eta*lmin))/(1+sqrt(eta*lmin)) <= beta < 1");

  const auto k = power_bound_constants(eig.min, eig.max, eta, beta);
  SpectralBoundReport rep;
  rep.rho = k.rho;
  rep.c = k.c;
  rep.lambda_min = eig.min;
  rep.lambda_max = eig.max;
  rep.kappa_tilde = eig.max / eig.min;
  rep.slack = slack;

  const Matrix g = companion(h, eta, beta).g;
  const std::size_t dim = g.rows();
  GaussianSource source(seed);
  Matrix block(dim, trials);
  for (std::size_t j = 0; j < trials; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      block(i, j) = source.standard_normal();
      s += block(i, j) * block(i, j);
    }
    const double inv = 1.0 / std::sqrt(s);
    for (std::size_t i = 0; i < dim; ++i) block(i, j) *= inv;
  }
  for (std::size_t step = 1; step <= k_max; ++step) {
    block = matmul(g, block);
    const double bound = rep.c * std::pow(rep.rho, static_cast<double>(step));
    for (std::size_t j = 0; j < trials; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < dim; ++i) s += block(i, j) * block(i, j);
      const double ratio = std::sqrt(s) / bound;
      ++rep.checks;
      if (ratio > rep.max_ratio) {
        rep.max_ratio = ratio;
        rep.worst_k = step;
        rep.worst_trial = j;
      }
      if (ratio > 1.0 + slack) ++rep.violations;
    }
  }
  rep.max_violation = std::max(0.0, rep.max_ratio - 1.0);
  rep.passed = rep.violations == 0;
  return rep;
}

}  // namespace naglab
