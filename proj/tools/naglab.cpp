// naglab command-line front end.
// Exit codes: 0 all checks pass, 1 a check failed, 2 usage error.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "naglab/naglab.hpp"

namespace {

using namespace naglab;

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

int cmd_gen_data(std::uint64_t seed, std::size_t dx, std::size_t dy, std::size_t n,
                 std::size_t rank, double cond, const std::string& out) {
  const Dataset d = gen_dataset(seed, dx, dy, n, rank, cond);
  const auto sv = singular_values(d.X);
  json j = d;
  j["singular_values"] = std::vector<double>(sv.begin(), sv.begin() + static_cast<std::ptrdiff_t>(rank));
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << "\n";
  } else {
    write_text_file(out, j.dump(2) + "\n");
    std::cout << "wrote " << out << " (X " << d.X.shape_string() << ", rank " << rank << ")\n";
  }
  return kPass;
}

void print_arms(const ExperimentResult& r) {
  for (const auto& a : r.arms) {
    std::printf("%-16s seed %-4llu kappa %-10.4g pair %.3e -> %.3e  envelope %s  drift %s",
                std::string(to_string(a.kind)).c_str(), static_cast<unsigned long long>(a.seed),
                a.theory.kappa, a.trace.steps.front().pair_norm, a.trace.steps.back().pair_norm,
                a.envelope_holds ? "ok" : "VIOLATED", a.drift_holds ? "ok" : "VIOLATED");
    if (a.audited) std::printf("  audit max %.2e", a.max_identity_residual);
    std::printf("\n");
  }
}

int cmd_train(const std::string& config, const std::string& out_dir, bool require_audit,
              double tol) {
  ExperimentConfig cfg = load_config(config);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (require_audit) {
    cfg.audit = true;
    cfg.audit_tol = tol;
  }
  ExperimentResult r;
  try {
    r = run_experiment(cfg);
  } catch (const AuditError& e) {
    std::cerr << "audit failed: " << e.what() << "\n";
    return kFail;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kFail;
  }
  print_arms(r);
  if (!cfg.out_dir.empty()) {
    write_experiment(r, cfg.out_dir);
    std::cout << "wrote " << r.arms.size() << " traces to " << cfg.out_dir << "\n";
  }
  return kPass;
}

int cmd_spectral_bound(std::size_t dim, double lmin, double lmax, std::size_t kmax,
                       std::size_t trials, std::uint64_t seed) {
  GaussianSource source(seed);
  const Matrix h = random_spd(dim, lmin, lmax, source);
  const double kappa = lmax / lmin;
  const double eta = 1.0 / (2.0 * lmax);
  const double beta = nag_beta(kappa);
  const SpectralBoundReport rep = power_bound_check(h, eta, beta, kmax, trials, derive_seed(seed, 1));
  const bool caps = rep.rho <= companion_rate_cap(rep.kappa_tilde) + 1e-12 &&
                    rep.c <= 12.0 * std::sqrt(rep.kappa_tilde) + 1e-12;
  json j = rep;
  j["eta"] = eta;
  j["beta"] = beta;
  j["caps_hold"] = caps;
  std::cout << j.dump(2) << "\n";
  return rep.passed && caps ? kPass : kFail;
}

int cmd_init_check(const std::string& arch, std::size_t m, std::size_t L, std::size_t seeds,
                   std::size_t dx, double min_rate) {
  NetworkShape shape{arch_from_string(arch), L, m, dx, 1, dx};
  const Matrix X = Matrix::identity(dx);
  const InitSpectraReport rep = shape.arch == Arch::FC
                                    ? validate_init_spectra_fc(shape, X, seeds)
                                    : validate_init_spectra_res(shape, {}, X, seeds);
  std::cout << json(rep).dump(2) << "\n";
  return rep.pass_rate >= min_rate ? kPass : kFail;
}

int cmd_compare(const std::string& config) {
  const ExperimentConfig cfg = load_config(config);
  const ComparisonReport rep = compare(cfg);
  for (const auto& r : rep.rates)
    std::printf("%-16s seed %-4llu rho_hat %.6f  r2 %.4f  window [%zu, %zu]\n",
                std::string(to_string(r.kind)).c_str(), static_cast<unsigned long long>(r.seed),
                r.fit.rho_hat, r.fit.r_squared, r.fit.t_lo, r.fit.t_hi);
  std::printf("theory: NAG theta %.6f, GD 1-1/kappa %.6f\n", rep.theta, rep.gd_reference);
  if (rep.ordering_checked > 0)
    std::printf("ordering NAG < GD: %zu/%zu seeds\n", rep.ordering_held, rep.ordering_checked);
  if (!cfg.out_dir.empty()) write_experiment(rep.experiment, cfg.out_dir, comparison_summary(rep));
  return rep.ordering_checked == 0 || rep.passed ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nesterov-accelerated training of deep linear networks"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::size_t dx = 5, dy = 2, n = 5, rank = 5;
  double cond = 1.0;
  std::string out;
  auto* gen = app.add_subcommand("gen-data", "synthesize a dataset with a prescribed spectrum");
  gen->add_option("--seed", seed);
  gen->add_option("--dx", dx)->required();
  gen->add_option("--dy", dy)->required();
  gen->add_option("--n", n)->required();
  gen->add_option("--rank", rank)->required();
  gen->add_option("--cond", cond)->required();
  gen->add_option("--out", out, "output JSON path ('-' for stdout)");

  std::string config, out_dir;
  auto* train = app.add_subcommand("train", "run an experiment and write traces");
  train->add_option("--config", config)->required()->check(CLI::ExistingFile);
  train->add_option("--out-dir", out_dir);

  double tol = kAuditTolerance;
  auto* audit = app.add_subcommand("audit", "run an experiment with the residual audit forced on");
  audit->add_option("--config", config)->required()->check(CLI::ExistingFile);
  audit->add_option("--tol", tol);

  std::size_t dim = 10, kmax = 300, trials = 100;
  double lmin = 1.0, lmax = 50.0;
  auto* spectral = app.add_subcommand("spectral-bound", "check the companion power bound");
  spectral->add_option("--dim", dim);
  spectral->add_option("--lmin", lmin);
  spectral->add_option("--lmax", lmax);
  spectral->add_option("--kmax", kmax);
  spectral->add_option("--trials", trials);
  spectral->add_option("--seed", seed);

  std::string arch = "FC";
  std::size_t m = 400, L = 4, seeds = 100;
  double min_rate = 0.95;
  auto* init = app.add_subcommand("init-check", "validate initialization spectra");
  init->add_option("--arch", arch)->check(CLI::IsMember({"FC", "RESNET"}));
  init->add_option("--m", m);
  init->add_option("--L", L);
  init->add_option("--seeds", seeds);
  std::size_t init_dx = 3;
  init->add_option("--dx", init_dx, "size of the identity data matrix");
  init->add_option("--min-rate", min_rate);

  auto* cmp = app.add_subcommand("compare", "fit rates and compare optimizers");
  cmp->add_option("--config", config)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }

  try {
    if (*gen) return cmd_gen_data(seed, dx, dy, n, rank, cond, out);
    if (*train) return cmd_train(config, out_dir, false, tol);
    if (*audit) return cmd_train(config, "", true, tol);
    if (*spectral) return cmd_spectral_bound(dim, lmin, lmax, kmax, trials, seed);
    if (*init) return cmd_init_check(arch, m, L, seeds, init_dx, min_rate);
    if (*cmp) return cmd_compare(config);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return kFail;
  }
  return kUsage;
}
