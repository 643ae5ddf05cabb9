#pragma once

// Closed-form hyperparameters, rates and radii for NAG on deep linear
// networks, plus statistical validators for the initialization-time
// spectrum bounds those formulas rely on.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "naglab/dynamics.hpp"
#include "naglab/errors.hpp"
#include "naglab/linalg.hpp"
#include "naglab/matrix.hpp"
#include "naglab/models.hpp"
#include "naglab/random.hpp"

namespace naglab {

enum class HyperSource { Theorem, EmpiricalSpectrum, Manual };

inline std::string_view to_string(HyperSource s) {
  switch (s) {
    case HyperSource::Theorem: return "THEOREM";
    case HyperSource::EmpiricalSpectrum: return "EMPIRICAL_SPECTRUM";
    case HyperSource::Manual: return "MANUAL";
  }
  return "?";
}

inline HyperSource hyper_source_from_string(std::string_view s) {
  if (s == "THEOREM") return HyperSource::Theorem;
  if (s == "EMPIRICAL_SPECTRUM") return HyperSource::EmpiricalSpectrum;
  if (s == "MANUAL") return HyperSource::Manual;
  throw ContractError("unknown hyperparameter source '" + std::string(s) + "'");
}

struct TheoryBundle {
  Arch arch = Arch::FC;
  HyperSource source = HyperSource::Theorem;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double kappa = 0.0;
  double eta = 0.0;
  double beta = 0.0;
  double theta = 0.0;          // 1 - 1/(2 sqrt(kappa))
  double rho = 0.0;            // 1 - 2/(3 sqrt(kappa))
  double envelope_coef = 0.0;  // 24 sqrt(kappa)
  double drift_radius = 0.0;   // R_lin (FC) or R_res (RESNET)
  double b0 = 0.0;
  std::optional<double> a;          // ||A|| ||B|| ||X||, RESNET
  std::optional<double> eta_ratio;  // (1/(2 lambda_max)) / eta, RESNET
  std::optional<double> min_width;
  double sigma_max_x = 0.0;
  double sigma_min_x = 0.0;
};

inline double nag_beta(double kappa) {
  const double s = 3.0 * std::sqrt(kappa);
  return (s - 2.0) / (s + 2.0);
}
inline double envelope_rate(double kappa) { return 1.0 - 1.0 / (2.0 * std::sqrt(kappa)); }
inline double companion_rate_cap(double kappa) { return 1.0 - 2.0 / (3.0 * std::sqrt(kappa)); }

/// Fills kappa, beta, theta, rho and envelope_coef from lambda_min/max.
inline void complete_rates(TheoryBundle& b) {
  if (!(b.lambda_min > 0.0) || !(b.lambda_max >= b.lambda_min))
    throw ContractError("theory: need 0 < lambda_min <= lambda_max");
  b.kappa = b.lambda_max / b.lambda_min;
  b.beta = nag_beta(b.kappa);
  b.theta = envelope_rate(b.kappa);
  b.rho = companion_rate_cap(b.kappa);
  b.envelope_coef = 24.0 * std::sqrt(b.kappa);
}

inline TheoryBundle fc_theory_bundle(const Matrix& X, std::size_t L, std::size_t d_y,
                                     double b0_measured) {
  if (L < 1 || d_y < 1) throw ContractError("fc_theory_bundle: need L >= 1 and d_y >= 1");
  if (frobenius_norm(X) == 0.0) throw ContractError("fc_theory_bundle: X has rank zero");
  const auto sx = nonzero_singular_extremes(X);
  TheoryBundle b;
  b.arch = Arch::FC;
  b.sigma_max_x = sx.max;
  b.sigma_min_x = sx.min;
  const double Ld = static_cast<double>(L);
  const double dy = static_cast<double>(d_y);
  b.lambda_min = std::pow(0.8, 4) * Ld * sx.min * sx.min / dy;
  b.lambda_max = std::pow(1.2, 4) * Ld * sx.max * sx.max / dy;
  complete_rates(b);
  b.eta = 1.0 / (2.0 * b.lambda_max);
  b.b0 = b0_measured;
  b.drift_radius =
      792.0 * sx.max * b0_measured * std::sqrt(dy * b.kappa) / (Ld * sx.min * sx.min);
  return b;
}

inline TheoryBundle res_theory_bundle(const Matrix& X, std::size_t L, std::size_t m, double alpha,
                                      double gamma, const Matrix& A, const Matrix& B,
                                      double b0_measured = 0.0) {
  if (L < 1 || m < 1) throw ContractError("res_theory_bundle: need L >= 1 and m >= 1");
  if (frobenius_norm(X) == 0.0) throw ContractError("res_theory_bundle: X has rank zero");
  const auto sx = nonzero_singular_extremes(X);
  TheoryBundle b;
  b.arch = Arch::ResNet;
  b.sigma_max_x = sx.max;
  b.sigma_min_x = sx.min;
  const double Ld = static_cast<double>(L);
  const double scale = Ld * alpha * alpha * gamma * gamma * static_cast<double>(m) * static_cast<double>(m);
  b.lambda_min = std::pow(0.9, 4) * scale * sx.min * sx.min;
  b.lambda_max = std::pow(1.1, 4) * scale * sx.max * sx.max;
  complete_rates(b);
  const double a = spectral_norm(A) * spectral_norm(B) * sx.max;
  b.a = a;
  b.eta = 1.0 / (2.0 * Ld * a * a);
  b.eta_ratio = (1.0 / (2.0 * b.lambda_max)) / b.eta;
  b.b0 = b0_measured;
  b.drift_radius = 1.0 / (2000.0 * Ld * b.kappa);
  return b;
}

/// Replaces lambda_min/max by the measured extremes of H_0 and re-derives
/// eta = 1/(2 lambda_max) and the rates.
inline TheoryBundle with_empirical_spectrum(TheoryBundle b, const EigExtremes& h0) {
  const double kappa_formula = b.kappa;
  b.source = HyperSource::EmpiricalSpectrum;
  b.lambda_min = h0.min;
  b.lambda_max = h0.max;
  complete_rates(b);
  b.eta = 1.0 / (2.0 * b.lambda_max);
  // R_lin scales with sqrt(kappa), R_res with 1/kappa.
  if (b.arch == Arch::FC) b.drift_radius *= std::sqrt(b.kappa / kappa_formula);
  else b.drift_radius *= kappa_formula / b.kappa;
  return b;
}

struct WidthInputs {
  std::size_t L = 1;
  std::size_t r = 1;
  std::size_t d_x = 1;
  std::size_t d_y = 1;
  std::size_t n = 1;
  double w_star_norm = 0.0;
  double delta = 0.1;
  double alpha = 1.0;
  double gamma = 1.0;
  double constant = 1.0;
};

/// Advisory width from the over-parameterization requirement, evaluated with
/// a configurable leading constant.
///   FC:     C L max{r k^5 d_y (1 + |W*|^2), r k^5 log(r/delta), log L}
///   RESNET: C max{d_y r k^5 log(n/delta), sqrt(r) k^2.5 a |W*| / (alpha gamma),
///                 d_x + d_y + log(1/delta)}
inline double min_width_advisory(const TheoryBundle& b, const WidthInputs& in) {
  if (!(in.delta > 0.0 && in.delta < 1.0))
    throw ContractError("min_width_advisory: delta must lie in (0, 1)");
  const double k5 = std::pow(b.kappa, 5);
  const double r = static_cast<double>(in.r);
  const double dy = static_cast<double>(in.d_y);
  if (b.arch == Arch::FC) {
    const double L = static_cast<double>(in.L);
    const double t1 = r * k5 * dy * (1.0 + in.w_star_norm * in.w_star_norm);
    const double t2 = r * k5 * std::log(r / in.delta);
    const double t3 = std::log(L);
    return in.constant * L * std::max({t1, t2, t3});
  }
  const double a = b.a.value_or(0.0);
  const double t1 = dy * r * k5 * std::log(static_cast<double>(in.n) / in.delta);
  const double t2 = std::sqrt(r) * std::pow(b.kappa, 2.5) * a * in.w_star_norm / (in.alpha * in.gamma);
  const double t3 = static_cast<double>(in.d_x + in.d_y) + std::log(1.0 / in.delta);
  return in.constant * std::max({t1, t2, t3});
}

// Initialization validators --------------------------------------------------

struct InitSpectraReport {
  std::size_t seeds = 0;
  std::size_t passes = 0;          // every primary inequality held
  std::size_t product_passes = 0;  // middle-product norm bound held (FC only)
  double pass_rate = 0.0;
  double product_pass_rate = 0.0;
  std::vector<std::string> failures;  // first failing inequality per failing seed
};

inline void finish(InitSpectraReport& r) {
  r.pass_rate = r.seeds ? static_cast<double>(r.passes) / static_cast<double>(r.seeds) : 0.0;
  r.product_pass_rate =
      r.seeds ? static_cast<double>(r.product_passes) / static_cast<double>(r.seeds) : 0.0;
}

/// Checks, for seeds base_seed + k, k < seeds:
///   sigma_max(W^{L:i}) <= 1.2 m^{(L-i+1)/2},  sigma_min(W^{L:i}) >= 0.8 m^{(L-i+1)/2},  1 < i <= L
///   sigma_max(W^{j:1}X) <= 1.2 m^{j/2} sigma_max(X), sigma_min >= 0.8 m^{j/2} sigma_min(X), 1 <= j < L
///   lambda(H_0) within [0.8^4 L sigma_min^2(X)/d_y, 1.2^4 L sigma_max^2(X)/d_y]
/// and separately ||W^{j:i}|| <= c sqrt(L) m^{(j-i+1)/2} for 1 < i <= j < L.
inline InitSpectraReport validate_init_spectra_fc(const NetworkShape& shape, const Matrix& X,
                                                  std::size_t seeds, std::uint64_t base_seed = 0,
                                                  double product_c = 2.0) {
  if (shape.arch != Arch::FC) throw ContractError("validate_init_spectra_fc: shape is not FC");
  const auto sx = nonzero_singular_extremes(X);
  const double m = static_cast<double>(shape.m);
  const double Ld = static_cast<double>(shape.L);
  const std::size_t L = shape.L;
  InitSpectraReport rep;
  for (std::size_t k = 0; k < seeds; ++k) {
    const auto p = init_fc_gaussian(shape, base_seed + k);
    std::string failure;
    auto check = [&](bool ok, const std::string& what) {
      if (!ok && failure.empty()) failure = what;
    };
    for (std::size_t i = 2; i <= L; ++i) {
      const auto s = singular_extremes(chain_product(p.hidden, i, L));
      const double ref = std::pow(m, static_cast<double>(L - i + 1) / 2.0);
      check(s.max <= 1.2 * ref, "sigma_max(W^{L:" + std::to_string(i) + "})");
      check(s.min >= 0.8 * ref, "sigma_min(W^{L:" + std::to_string(i) + "})");
    }
    Matrix z = X;
    for (std::size_t j = 1; j < L; ++j) {
      z = matmul(p.hidden[j - 1], z);
      const auto s = singular_extremes(z);
      const double ref = std::pow(m, static_cast<double>(j) / 2.0);
      check(s.max <= 1.2 * ref * sx.max, "sigma_max(W^{" + std::to_string(j) + ":1}X)");
      check(s.min >= 0.8 * ref * sx.min, "sigma_min(W^{" + std::to_string(j) + ":1}X)");
    }
    if (shape.d_y * X.cols() <= kGramCap) {
      const auto e = sym_eig_extremes(gram_fc(p, X).h);
      const double dy = static_cast<double>(shape.d_y);
      check(e.min >= std::pow(0.8, 4) * Ld * sx.min * sx.min / dy, "lambda_min(H_0)");
      check(e.max <= std::pow(1.2, 4) * Ld * sx.max * sx.max / dy, "lambda_max(H_0)");
    }
    bool products_ok = true;
    for (std::size_t i = 2; i + 1 <= L; ++i)
      for (std::size_t j = i; j < L; ++j) {
        const double bound = product_c * std::sqrt(Ld) * std::pow(m, static_cast<double>(j - i + 1) / 2.0);
        if (singular_extremes(chain_product(p.hidden, i, j)).max > bound) products_ok = false;
      }
    ++rep.seeds;
    if (failure.empty()) ++rep.passes;
    else rep.failures.push_back("seed " + std::to_string(base_seed + k) + ": " + failure);
    if (products_ok) ++rep.product_passes;
  }
  finish(rep);
  return rep;
}

/// Checks 0.9 alpha sqrt(m) <= sigma(A) <= 1.1 alpha sqrt(m), the same band
/// with gamma for B, and lambda(H_0) within
/// [0.9^4 L a^2 g^2 m^2 sigma_min^2(X), 1.1^4 L a^2 g^2 m^2 sigma_max^2(X)].
inline InitSpectraReport validate_init_spectra_res(const NetworkShape& shape,
                                                   const ResNetInitConfig& cfg, const Matrix& X,
                                                   std::size_t seeds, std::uint64_t base_seed = 0) {
  if (shape.arch != Arch::ResNet) throw ContractError("validate_init_spectra_res: shape is not RESNET");
  const auto sx = nonzero_singular_extremes(X);
  const double m = static_cast<double>(shape.m);
  const double Ld = static_cast<double>(shape.L);
  const double ag2 = cfg.alpha * cfg.alpha * cfg.gamma * cfg.gamma;
  InitSpectraReport rep;
  for (std::size_t k = 0; k < seeds; ++k) {
    const auto p = init_resnet(shape, cfg, base_seed + k);
    std::string failure;
    auto check = [&](bool ok, const char* what) {
      if (!ok && failure.empty()) failure = what;
    };
    const auto sa = singular_extremes(p.A());
    const auto sb = singular_extremes(p.B());
    check(sa.min >= 0.9 * cfg.alpha * std::sqrt(m), "sigma_min(A)");
    check(sa.max <= 1.1 * cfg.alpha * std::sqrt(m), "sigma_max(A)");
    check(sb.min >= 0.9 * cfg.gamma * std::sqrt(m), "sigma_min(B)");
    check(sb.max <= 1.1 * cfg.gamma * std::sqrt(m), "sigma_max(B)");
    if (shape.d_y * X.cols() <= kGramCap) {
      const auto e = sym_eig_extremes(gram_res(p, X).h);
      check(e.min >= std::pow(0.9, 4) * Ld * ag2 * m * m * sx.min * sx.min, "lambda_min(H_0)");
      check(e.max <= std::pow(1.1, 4) * Ld * ag2 * m * m * sx.max * sx.max, "lambda_max(H_0)");
    }
    ++rep.seeds;
    ++rep.product_passes;
    if (failure.empty()) ++rep.passes;
    else rep.failures.push_back("seed " + std::to_string(base_seed + k) + ": " + failure);
  }
  finish(rep);
  return rep;
}

struct B0Report {
  double loss0 = 0.0;
  double bound = 0.0;
  double b0_measured = 0.0;  // ||U_0 - Y||_F
  bool holds = false;
};

/// Initial loss against its high-probability bound.
///   FC:     C max{1, log(r/delta)/d_y, |W*|^2} |X|_F^2   (C configurable)
///   RESNET: (6.05 a^2 g^2 d_y m log(2n/delta) + |W*|^2) |X|_F^2
inline B0Report validate_b0(const NetworkParams& p, const Dataset& data, double delta,
                            const ResNetInitConfig& cfg = {}, double fc_constant = 1.0) {
  if (!(delta > 0.0 && delta < 1.0)) throw ContractError("validate_b0: delta must lie in (0, 1)");
  B0Report rep;
  const Matrix u = forward(p, data.X);
  rep.loss0 = loss(u, data.Y);
  rep.b0_measured = std::sqrt(2.0 * rep.loss0);
  const double xf = frobenius_norm(data.X);
  const double ws = data.W_star.empty() ? 0.0 : spectral_norm(data.W_star);
  const double dy = static_cast<double>(p.shape.d_y);
  if (p.shape.arch == Arch::FC) {
    const double r = static_cast<double>(std::max<std::size_t>(data.r, 1));
    rep.bound = fc_constant * std::max({1.0, std::log(r / delta) / dy, ws * ws}) * xf * xf;
  } else {
    const double n = static_cast<double>(data.X.cols());
    rep.bound = (6.05 * cfg.alpha * cfg.alpha * cfg.gamma * cfg.gamma * dy *
                     static_cast<double>(p.shape.m) * std::log(2.0 * n / delta) +
                 ws * ws) *
                xf * xf;
  }
  rep.holds = rep.loss0 <= rep.bound;
  return rep;
}

}  // namespace naglab
