#pragma once

// Experiment orchestration: synthetic data with a prescribed spectrum,
// per-(optimizer, seed) training arms with optional residual audits,
// envelope/drift checks against the theory bundle, and rate fitting.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "naglab/dynamics.hpp"
#include "naglab/errors.hpp"
#include "naglab/linalg.hpp"
#include "naglab/matrix.hpp"
#include "naglab/models.hpp"
#include "naglab/optimizers.hpp"
#include "naglab/random.hpp"
#include "naglab/theory.hpp"

namespace naglab {

/// X = U diag(s) V^T with random orthonormal U (d_x x r), V (n x r) and
/// s_k = cond^{(r-1-k)/(r-1)}; W_star Gaussian; Y = W_star X.
inline Dataset gen_dataset(std::uint64_t seed, std::size_t d_x, std::size_t d_y, std::size_t n,
                           std::size_t r, double cond) {
  if (r < 1 || r > std::min(d_x, n))
    throw ContractError("gen_dataset: infeasible rank " + std::to_string(r) + " for " +
                        std::to_string(d_x) + "x" + std::to_string(n));
  if (!(cond >= 1.0)) throw ContractError("gen_dataset: cond must be >= 1");
  if (r == 1 && cond != 1.0) throw ContractError("gen_dataset: rank 1 admits only cond = 1");
  GaussianSource source(seed);
  const Matrix u = orthonormal_columns(gaussian_matrix(d_x, r, 1.0, source));
  const Matrix v = orthonormal_columns(gaussian_matrix(n, r, 1.0, source));
  Matrix us = u;
  for (std::size_t k = 0; k < r; ++k) {
    const double s = r == 1 ? 1.0
                            : std::pow(cond, static_cast<double>(r - 1 - k) /
                                                 static_cast<double>(r - 1));
    for (std::size_t i = 0; i < d_x; ++i) us(i, k) *= s;
  }
  Dataset d;
  d.X = matmul_nt(us, v);
  d.W_star = gaussian_matrix(d_y, d_x, 1.0, source);
  d.Y = matmul(d.W_star, d.X);
  d.r = r;
  return d;
}

/// Random symmetric matrix Q diag(lambda) Q^T with lambda_min and lambda_max
/// attained exactly and the interior eigenvalues uniform in between.
inline Matrix random_spd(std::size_t dim, double lambda_min, double lambda_max,
                         GaussianSource& source) {
  if (dim < 1) throw ContractError("random_spd: dim must be >= 1");
  if (!(lambda_min > 0.0 && lambda_max >= lambda_min))
    throw ContractError("random_spd: need 0 < lambda_min <= lambda_max");
  const Matrix q = orthonormal_columns(gaussian_matrix(dim, dim, 1.0, source));
  std::vector<double> lambda(dim);
  for (std::size_t k = 0; k < dim; ++k)
    lambda[k] = k == 0 ? lambda_max
                : k == 1 ? lambda_min
                         : lambda_min + (lambda_max - lambda_min) * source.uniform();
  Matrix qd = q;
  for (std::size_t k = 0; k < dim; ++k)
    for (std::size_t i = 0; i < dim; ++i) qd(i, k) *= lambda[k];
  Matrix h = matmul_nt(qd, q);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double avg = 0.5 * (h(i, j) + h(j, i));
      h(i, j) = avg;
      h(j, i) = avg;
    }
  return h;
}

struct HyperParams {
  HyperSource source = HyperSource::Theorem;
  double eta = 0.0;   // MANUAL only
  double beta = 0.0;  // MANUAL only
};

struct ExperimentConfig {
  Arch arch = Arch::FC;
  std::size_t L = 3;
  std::size_t m = 32;
  std::size_t d_x = 5;
  std::size_t d_y = 2;
  std::size_t n = 5;
  std::size_t r = 5;
  double cond = 1.0;
  std::vector<OptimizerKind> optimizers{OptimizerKind::NagMomentum};
  std::size_t max_iters = 100;
  std::vector<std::uint64_t> seeds{0};
  HyperParams hyper;
  std::optional<bool> audit;  // default: on iff m <= 512
  double audit_tol = kAuditTolerance;
  ResNetInitConfig resnet;
  std::uint64_t data_seed = 0;
  double delta = 0.1;
  double window_fraction = 0.5;
  std::string out_dir;

  NetworkShape shape() const { return {arch, L, m, d_x, d_y, n}; }
  bool audit_enabled() const { return audit.value_or(m <= 512); }

  void validate() const {
    shape().validate();
    if (arch == Arch::ResNet) resnet.validate();
    if (r < 1 || r > std::min(d_x, n)) throw ContractError("config: need 1 <= r <= min(d_x, n)");
    if (!(cond >= 1.0)) throw ContractError("config: cond must be >= 1");
    if (max_iters < 2) throw ContractError("config: max_iters must be >= 2");
    if (optimizers.empty()) throw ContractError("config: no optimizers");
    if (seeds.empty()) throw ContractError("config: no seeds");
    if (hyper.source == HyperSource::Manual &&
        (!(hyper.eta > 0.0) || !(hyper.beta >= 0.0 && hyper.beta <= 1.0)))
      throw ContractError("config: MANUAL hyperparameters need eta > 0 and beta in [0, 1]");
  }
};

struct ArmResult {
  OptimizerKind kind = OptimizerKind::GD;
  std::uint64_t seed = 0;
  TheoryBundle theory;
  double eta = 0.0;
  double beta = 0.0;
  ResidualPairTrace trace;
  bool audited = false;
  double max_identity_residual = 0.0;
  bool envelope_holds = true;
  std::optional<std::size_t> first_envelope_violation;
  double max_envelope_ratio = 0.0;  // max_t pair_norm / envelope
  bool drift_holds = true;
  double max_drift = 0.0;  // FC: max ||W_t - W_0||_F; RESNET: max ||W_t||_F
};

inline NetworkParams init_network(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.arch == Arch::FC ? init_fc_gaussian(cfg.shape(), seed)
                              : init_resnet(cfg.shape(), cfg.resnet, seed);
}

/// Theory bundle for one initialization, honoring cfg.hyper.
inline TheoryBundle bundle_for(const ExperimentConfig& cfg, const Dataset& data,
                               const NetworkParams& w0) {
  const double b0 = frobenius_distance(forward(w0, data.X), data.Y);
  TheoryBundle b = cfg.arch == Arch::FC
                       ? fc_theory_bundle(data.X, cfg.L, cfg.d_y, b0)
                       : res_theory_bundle(data.X, cfg.L, cfg.m, cfg.resnet.alpha,
                                           cfg.resnet.gamma, w0.A(), w0.B(), b0);
  if (cfg.hyper.source == HyperSource::EmpiricalSpectrum) {
    const auto view = make_view(w0, data.X);
    const EigExtremes e = cfg.d_y * cfg.n <= kGramCap ? sym_eig_extremes(gram_from_view(view))
                                                      : GramOperator(view).extremes();
    b = with_empirical_spectrum(b, e);
  } else if (cfg.hyper.source == HyperSource::Manual) {
    b.source = HyperSource::Manual;
    b.eta = cfg.hyper.eta;
    b.beta = cfg.hyper.beta;
  }
  WidthInputs in;
  in.L = cfg.L;
  in.r = data.r;
  in.d_x = cfg.d_x;
  in.d_y = cfg.d_y;
  in.n = cfg.n;
  in.w_star_norm = spectral_norm(data.W_star);
  in.delta = cfg.delta;
  in.alpha = cfg.resnet.alpha;
  in.gamma = cfg.resnet.gamma;
  b.min_width = min_width_advisory(b, in);
  return b;
}

inline ArmResult run_arm(const ExperimentConfig& cfg, const Dataset& data, OptimizerKind kind,
                         std::uint64_t seed) {
  const NetworkParams w0 = init_network(cfg, seed);
  ArmResult res;
  res.kind = kind;
  res.seed = seed;
  res.theory = bundle_for(cfg, data, w0);
  res.eta = res.theory.eta;
  res.beta = kind == OptimizerKind::GD ? 0.0 : res.theory.beta;

  const Matrix& X = data.X;
  const Matrix& Y = data.Y;
  const GradFn grad_fn = [&](const NetworkParams& p) { return layer_gradients(p, X, Y); };
  OptimizerState state = make_state(kind, res.eta, res.beta, w0);

  // Heavy ball does not follow the NAG residual recursion.
  res.audited = cfg.audit_enabled() && kind != OptimizerKind::HeavyBall;
  std::optional<ResidualAuditor> auditor;
  if (res.audited) auditor.emplace(w0, X, Y, res.eta, res.beta, cfg.audit_tol);

  NetworkParams prev = w0;
  NetworkParams cur = w0;
  double pair0 = 0.0;
  for (std::size_t t = 0; t <= cfg.max_iters; ++t) {
    const Vector* prev_xi = t == 0 ? nullptr : &res.trace.steps.back().xi;
    TraceStep s = trace_step(t, cur, w0, X, Y, prev_xi);
    if (t == 0) pair0 = s.pair_norm;
    s.theory_envelope =
        res.theory.envelope_coef * std::pow(res.theory.theta, static_cast<double>(t)) * pair0;
    if (s.theory_envelope > 0.0)
      res.max_envelope_ratio = std::max(res.max_envelope_ratio, s.pair_norm / s.theory_envelope);
    if (!(s.pair_norm <= s.theory_envelope)) {
      if (res.envelope_holds) res.first_envelope_violation = t;
      res.envelope_holds = false;
    }
    const double drift = cfg.arch == Arch::FC ? s.max_layer_drift : [&] {
      double d = 0.0;
      for (const auto& w : cur.hidden) d = std::max(d, frobenius_norm(w));
      return d;
    }();
    res.max_drift = std::max(res.max_drift, drift);
    if (!(drift <= res.theory.drift_radius)) res.drift_holds = false;

    if (t < cfg.max_iters) {
      StepResult next = step(cur, std::move(state), grad_fn);
      if (auditor) {
        AuditResult a = auditor->audit(t, prev, cur, next.params);
        res.max_identity_residual = std::max(res.max_identity_residual, a.identity_residual);
        s.identity_residual = a.identity_residual;
        s.breakdown = std::move(a.breakdown);
      }
      prev = std::move(cur);
      cur = std::move(next.params);
      state = std::move(next.state);
    }
    res.trace.steps.push_back(std::move(s));
  }
  return res;
}

/// Worker count from NAGLAB_THREADS, capped by hardware concurrency.
inline std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("NAGLAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = std::min(n, static_cast<std::size_t>(v));
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

/// Runs fn(i) for i < jobs on a small worker pool. Exceptions are rethrown
/// in index order after all workers finish.
inline void parallel_for(std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = worker_count(jobs);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct ExperimentResult {
  ExperimentConfig config;
  Dataset data;
  std::vector<ArmResult> arms;  // optimizer-major, then seed order
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult out;
  out.config = cfg;
  out.data = gen_dataset(cfg.data_seed, cfg.d_x, cfg.d_y, cfg.n, cfg.r, cfg.cond);
  const std::size_t jobs = cfg.optimizers.size() * cfg.seeds.size();
  out.arms.resize(jobs);
  parallel_for(jobs, [&](std::size_t i) {
    const OptimizerKind kind = cfg.optimizers[i / cfg.seeds.size()];
    const std::uint64_t seed = cfg.seeds[i % cfg.seeds.size()];
    out.arms[i] = run_arm(cfg, out.data, kind, seed);
  });
  return out;
}

// Rate fitting ----------------------------------------------------------------

struct RateFit {
  double rho_hat = 1.0;
  double r_squared = 1.0;
  std::size_t t_lo = 0;
  std::size_t t_hi = 0;
  std::size_t points = 0;
};

/// Least-squares slope of log(series) over the window that skips the first
/// 10% of iterations and keeps the last `window_fraction` of those before
/// the series drops below floor * series[0]; rho_hat = exp(slope).
inline RateFit fit_rate(const std::vector<double>& series, double window_fraction = 0.5,
                        double floor = 1e-12) {
  if (series.empty() || !(series.front() > 0.0))
    throw ContractError("fit_rate: series must start positive");
  std::size_t end = series.size();
  for (std::size_t t = 0; t < series.size(); ++t)
    if (!(series[t] >= floor * series.front())) {
      end = t;
      break;
    }
  const auto skip = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(end)));
  const auto keep = static_cast<std::size_t>(std::floor(window_fraction * static_cast<double>(end)));
  const std::size_t lo = std::max(skip, end > keep ? end - keep : 0);

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
  std::size_t k = 0;
  for (std::size_t t = lo; t < end; ++t) {
    if (!(series[t] > 0.0)) continue;
    const double x = static_cast<double>(t);
    const double y = std::log(series[t]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    ++k;
  }
  if (k < 5) throw ContractError("fit_rate: fewer than 5 usable points");
  const double kn = static_cast<double>(k);
  const double cxx = sxx - sx * sx / kn;
  const double cxy = sxy - sx * sy / kn;
  const double cyy = syy - sy * sy / kn;
  const double slope = cxy / cxx;
  RateFit fit;
  fit.rho_hat = std::exp(slope);
  fit.r_squared = cyy <= 1e-300 * std::max(1.0, syy) ? 1.0 : std::clamp(cxy * cxy / (cxx * cyy), 0.0, 1.0);
  fit.t_lo = lo;
  fit.t_hi = end - 1;
  fit.points = k;
  return fit;
}

inline RateFit fit_rate(const ResidualPairTrace& trace, double window_fraction = 0.5) {
  std::vector<double> series;
  series.reserve(trace.steps.size());
  for (const auto& s : trace.steps) series.push_back(s.pair_norm);
  return fit_rate(series, window_fraction);
}

struct ArmRate {
  OptimizerKind kind = OptimizerKind::GD;
  std::uint64_t seed = 0;
  RateFit fit;
};

struct ComparisonReport {
  ExperimentResult experiment;
  std::vector<ArmRate> rates;
  double theta = 0.0;         // NAG theory rate 1 - 1/(2 sqrt(kappa)), first seed
  double gd_reference = 0.0;  // 1 - 1/kappa, first seed
  std::size_t ordering_checked = 0;
  std::size_t ordering_held = 0;  // seeds with rho_hat(NAG) < rho_hat(GD)
  double ordering_fraction = 0.0;
  bool passed = false;
};

inline ComparisonReport compare(const ExperimentConfig& cfg, double min_fraction = 0.9) {
  if (cfg.optimizers.size() < 2) throw ContractError("compare: need at least two optimizers");
  ComparisonReport rep;
  rep.experiment = run_experiment(cfg);
  for (const auto& arm : rep.experiment.arms)
    rep.rates.push_back({arm.kind, arm.seed, fit_rate(arm.trace, cfg.window_fraction)});
  const auto& first = rep.experiment.arms.front().theory;
  rep.theta = first.theta;
  rep.gd_reference = 1.0 - 1.0 / first.kappa;

  const auto nag = std::find_if(cfg.optimizers.begin(), cfg.optimizers.end(), is_nag);
  const auto gd = std::find(cfg.optimizers.begin(), cfg.optimizers.end(), OptimizerKind::GD);
  if (nag != cfg.optimizers.end() && gd != cfg.optimizers.end()) {
    const std::size_t ns = cfg.seeds.size();
    const auto nag_idx = static_cast<std::size_t>(nag - cfg.optimizers.begin());
    const auto gd_idx = static_cast<std::size_t>(gd - cfg.optimizers.begin());
    for (std::size_t s = 0; s < ns; ++s) {
      ++rep.ordering_checked;
      if (rep.rates[nag_idx * ns + s].fit.rho_hat < rep.rates[gd_idx * ns + s].fit.rho_hat)
        ++rep.ordering_held;
    }
    rep.ordering_fraction =
        static_cast<double>(rep.ordering_held) / static_cast<double>(rep.ordering_checked);
    rep.passed = rep.ordering_fraction >= min_fraction;
  }
  return rep;
}

}  // namespace naglab
