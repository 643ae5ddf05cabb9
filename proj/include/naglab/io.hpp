#pragma once

// JSON and CSV serialization. Doubles are written with 17 significant
// digits, so every numeric field round-trips bit-exactly.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "naglab/dynamics.hpp"
#include "naglab/errors.hpp"
#include "naglab/harness.hpp"
#include "naglab/matrix.hpp"
#include "naglab/models.hpp"
#include "naglab/optimizers.hpp"
#include "naglab/theory.hpp"

namespace naglab {

using json = nlohmann::json;

// Matrix -----------------------------------------------------------------------

inline void to_json(json& j, const Matrix& a) {
  j = json{{"rows", a.rows()}, {"cols", a.cols()}, {"data", a.values()}};
}

inline void from_json(const json& j, Matrix& a) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != rows * cols)
    throw DimensionError("matrix json: " + std::to_string(data.size()) + " entries for " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  a = Matrix::from_col_major(rows, cols, std::move(data));
}

// NetworkParams ------------------------------------------------------------------

inline void to_json(json& j, const NetworkParams& p) {
  const auto& s = p.shape;
  j = json{{"arch", to_string(s.arch)}, {"L", s.L},     {"m", s.m},
           {"d_x", s.d_x},              {"d_y", s.d_y}, {"n", s.n},
           {"layers", p.hidden}};
  if (p.io) {
    j["A"] = p.io->A;
    j["B"] = p.io->B;
  }
  if (p.seed) j["seed"] = *p.seed;
}

inline void from_json(const json& j, NetworkParams& p) {
  p.shape.arch = arch_from_string(j.at("arch").get<std::string>());
  p.shape.L = j.at("L").get<std::size_t>();
  p.shape.m = j.at("m").get<std::size_t>();
  p.shape.d_x = j.at("d_x").get<std::size_t>();
  p.shape.d_y = j.at("d_y").get<std::size_t>();
  p.shape.n = j.value("n", std::size_t{1});
  p.hidden = j.at("layers").get<LayerSet>();
  p.io.reset();
  if (j.contains("A") || j.contains("B")) {
    auto maps = std::make_shared<ResNetMaps>();
    maps->A = j.at("A").get<Matrix>();
    maps->B = j.at("B").get<Matrix>();
    p.io = std::move(maps);
  }
  p.seed.reset();
  if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
  p.validate();
}

// OptimizerState -----------------------------------------------------------------

inline constexpr int kStateFormatVersion = 1;

inline void to_json(json& j, const OptimizerState& s) {
  j = json{{"v", kStateFormatVersion},
           {"kind", to_string(s.kind)},
           {"eta", s.eta},
           {"beta", s.beta},
           {"t", s.t},
           {"prev_params", s.prev_params},
           {"momentum", s.momentum},
           {"aux_v", s.aux_v},
           {"prev_grad", s.prev_grad}};
}

inline void from_json(const json& j, OptimizerState& s) {
  if (j.at("v").get<int>() != kStateFormatVersion)
    throw ContractError("optimizer state: unsupported format version");
  s.kind = optimizer_from_string(j.at("kind").get<std::string>());
  s.eta = j.at("eta").get<double>();
  s.beta = j.at("beta").get<double>();
  s.t = j.at("t").get<std::size_t>();
  s.prev_params = j.at("prev_params").get<LayerSet>();
  s.momentum = j.at("momentum").get<LayerSet>();
  s.aux_v = j.at("aux_v").get<LayerSet>();
  s.prev_grad = j.at("prev_grad").get<LayerSet>();
}

// Reports ---------------------------------------------------------------------------

inline void to_json(json& j, const TheoryBundle& b) {
  j = json{{"arch", to_string(b.arch)},
           {"source", to_string(b.source)},
           {"lambda_min", b.lambda_min},
           {"lambda_max", b.lambda_max},
           {"kappa", b.kappa},
           {"eta", b.eta},
           {"beta", b.beta},
           {"theta", b.theta},
           {"rho", b.rho},
           {"c_cap", 12.0 * std::sqrt(b.kappa)},
           {"envelope_coef", b.envelope_coef},
           {"drift_radius", b.drift_radius},
           {"b0", b.b0},
           {"sigma_max_x", b.sigma_max_x},
           {"sigma_min_x", b.sigma_min_x}};
  if (b.a) j["a"] = *b.a;
  if (b.eta_ratio) j["eta_ratio"] = *b.eta_ratio;
  if (b.min_width) j["min_width"] = *b.min_width;
}

inline void to_json(json& j, const SpectralBoundReport& r) {
  j = json{{"rho", r.rho},
           {"c", r.c},
           {"kappa_tilde", r.kappa_tilde},
           {"lambda_min", r.lambda_min},
           {"lambda_max", r.lambda_max},
           {"max_ratio", r.max_ratio},
           {"max_violation", r.max_violation},
           {"worst_k", r.worst_k},
           {"worst_trial", r.worst_trial},
           {"violations", r.violations},
           {"checks", r.checks},
           {"slack", r.slack},
           {"passed", r.passed}};
}

inline void to_json(json& j, const RateFit& f) {
  j = json{{"rho_hat", f.rho_hat},
           {"r_squared", f.r_squared},
           {"window", {f.t_lo, f.t_hi}},
           {"points", f.points}};
}

inline void to_json(json& j, const InitSpectraReport& r) {
  j = json{{"seeds", r.seeds},
           {"passes", r.passes},
           {"pass_rate", r.pass_rate},
           {"product_passes", r.product_passes},
           {"product_pass_rate", r.product_pass_rate},
           {"failures", r.failures}};
}

inline void to_json(json& j, const Dataset& d) {
  j = json{{"X", d.X}, {"Y", d.Y}, {"W_star", d.W_star}, {"r", d.r}};
}

inline void from_json(const json& j, Dataset& d) {
  d.X = j.at("X").get<Matrix>();
  d.Y = j.at("Y").get<Matrix>();
  d.W_star = j.at("W_star").get<Matrix>();
  d.r = j.at("r").get<std::size_t>();
}

// ExperimentConfig ------------------------------------------------------------------

inline void to_json(json& j, const ExperimentConfig& c) {
  std::vector<std::string> opts;
  for (auto k : c.optimizers) opts.emplace_back(to_string(k));
  json hyper{{"source", to_string(c.hyper.source)}};
  if (c.hyper.source == HyperSource::Manual) {
    hyper["eta"] = c.hyper.eta;
    hyper["beta"] = c.hyper.beta;
  }
  j = json{{"arch", to_string(c.arch)},
           {"L", c.L},
           {"m", c.m},
           {"d_x", c.d_x},
           {"d_y", c.d_y},
           {"n", c.n},
           {"r", c.r},
           {"cond", c.cond},
           {"optimizers", opts},
           {"max_iters", c.max_iters},
           {"seeds", c.seeds},
           {"hyper", hyper},
           {"audit", c.audit_enabled()},
           {"audit_tol", c.audit_tol},
           {"alpha", c.resnet.alpha},
           {"gamma", c.resnet.gamma},
           {"data_seed", c.data_seed},
           {"delta", c.delta},
           {"window_fraction", c.window_fraction}};
  if (!c.out_dir.empty()) j["out_dir"] = c.out_dir;
}

/// Missing keys keep their defaults. "seeds" may be a list or a count
/// (seeds 0..count-1). "alpha"/"gamma" may be the string "inv_sqrt_m".
inline void from_json(const json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw ContractError("config: expected a JSON object");
  if (j.contains("arch")) c.arch = arch_from_string(j.at("arch").get<std::string>());
  auto get_size = [&](const char* key, std::size_t& field) {
    if (j.contains(key)) field = j.at(key).get<std::size_t>();
  };
  get_size("L", c.L);
  get_size("m", c.m);
  get_size("d_x", c.d_x);
  get_size("d_y", c.d_y);
  get_size("n", c.n);
  get_size("r", c.r);
  get_size("max_iters", c.max_iters);
  if (j.contains("cond")) c.cond = j.at("cond").get<double>();
  if (j.contains("optimizers")) {
    c.optimizers.clear();
    const auto& o = j.at("optimizers");
    if (o.is_string()) {
      c.optimizers.push_back(optimizer_from_string(o.get<std::string>()));
    } else {
      for (const auto& s : o) c.optimizers.push_back(optimizer_from_string(s.get<std::string>()));
    }
  }
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    c.seeds.clear();
    if (s.is_number_integer()) {
      for (std::uint64_t k = 0; k < s.get<std::uint64_t>(); ++k) c.seeds.push_back(k);
    } else {
      c.seeds = s.get<std::vector<std::uint64_t>>();
    }
  }
  if (j.contains("hyper")) {
    const auto& h = j.at("hyper");
    if (h.is_string()) {
      c.hyper.source = hyper_source_from_string(h.get<std::string>());
    } else {
      c.hyper.source = hyper_source_from_string(h.at("source").get<std::string>());
      c.hyper.eta = h.value("eta", 0.0);
      c.hyper.beta = h.value("beta", 0.0);
    }
  }
  if (j.contains("audit")) c.audit = j.at("audit").get<bool>();
  if (j.contains("audit_tol")) c.audit_tol = j.at("audit_tol").get<double>();
  auto get_scale = [&](const char* key, double& field) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (v.is_string()) {
      if (v.get<std::string>() != "inv_sqrt_m")
        throw ContractError(std::string("config: unknown ") + key + " '" + v.get<std::string>() + "'");
      field = 1.0 / std::sqrt(static_cast<double>(c.m));
    } else {
      field = v.get<double>();
    }
  };
  get_scale("alpha", c.resnet.alpha);
  get_scale("gamma", c.resnet.gamma);
  if (j.contains("data_seed")) c.data_seed = j.at("data_seed").get<std::uint64_t>();
  if (j.contains("delta")) c.delta = j.at("delta").get<double>();
  if (j.contains("window_fraction")) c.window_fraction = j.at("window_fraction").get<double>();
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot write '" + path.string() + "'");
  out << text;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ContractError("config '" + path.string() + "': " + e.what());
  }
  ExperimentConfig c = j.get<ExperimentConfig>();
  c.validate();
  return c;
}

// CSV ---------------------------------------------------------------------------------

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline constexpr const char* kTraceCsvHeader =
    "t,xi_norm,pair_norm,loss,phi_hat_norm,psi_norm,iota_norm,aggregate_norm,max_layer_drift,"
    "theory_envelope";

/// Breakdown columns are left empty on unaudited steps.
inline std::string trace_csv(const ResidualPairTrace& trace) {
  std::string out = kTraceCsvHeader;
  out += '\n';
  for (const auto& s : trace.steps) {
    out += std::to_string(s.t);
    for (double v : {s.xi_norm, s.pair_norm, s.loss}) out += ',' + format_double(v);
    for (int k = 0; k < 4; ++k) {
      out += ',';
      if (!s.breakdown) continue;
      const auto& b = *s.breakdown;
      const Vector& v = k == 0 ? b.phi_hat : k == 1 ? b.psi : k == 2 ? b.iota : b.aggregate;
      out += format_double(v.norm());
    }
    out += ',' + format_double(s.max_layer_drift);
    out += ',' + format_double(s.theory_envelope);
    out += '\n';
  }
  return out;
}

inline std::string arm_file_stem(const ExperimentConfig& c, const ArmResult& a) {
  return std::string(to_string(c.arch)) + "_" + std::string(to_string(a.kind)) + "_seed" +
         std::to_string(a.seed);
}

inline json arm_summary(const ExperimentConfig& c, const ArmResult& a) {
  json j{{"optimizer", to_string(a.kind)},
         {"seed", a.seed},
         {"trace", arm_file_stem(c, a) + ".csv"},
         {"eta", a.eta},
         {"beta", a.beta},
         {"theory", a.theory},
         {"audited", a.audited},
         {"max_identity_residual", a.max_identity_residual},
         {"envelope_holds", a.envelope_holds},
         {"max_envelope_ratio", a.max_envelope_ratio},
         {"drift_holds", a.drift_holds},
         {"max_drift", a.max_drift},
         {"initial_pair_norm", a.trace.steps.front().pair_norm},
         {"final_pair_norm", a.trace.steps.back().pair_norm}};
  if (a.first_envelope_violation) j["first_envelope_violation"] = *a.first_envelope_violation;
  return j;
}

inline json experiment_summary(const ExperimentResult& r) {
  json arms = json::array();
  for (const auto& a : r.arms) arms.push_back(arm_summary(r.config, a));
  return json{{"config", r.config}, {"arms", arms}};
}

inline json comparison_summary(const ComparisonReport& rep) {
  json j = experiment_summary(rep.experiment);
  for (std::size_t i = 0; i < rep.rates.size(); ++i) j["arms"][i]["rate"] = rep.rates[i].fit;
  j["theory_rates"] = {{"nag_theta", rep.theta}, {"gd_reference", rep.gd_reference}};
  j["ordering"] = {{"checked", rep.ordering_checked},
                   {"held", rep.ordering_held},
                   {"fraction", rep.ordering_fraction},
                   {"passed", rep.passed}};
  return j;
}

/// One CSV per (optimizer, seed) plus summary.json.
inline void write_experiment(const ExperimentResult& r, const std::filesystem::path& dir,
                             const json& summary) {
  std::filesystem::create_directories(dir);
  for (const auto& a : r.arms)
    write_text_file(dir / (arm_file_stem(r.config, a) + ".csv"), trace_csv(a.trace));
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
}

inline void write_experiment(const ExperimentResult& r, const std::filesystem::path& dir) {
  write_experiment(r, dir, experiment_summary(r));
}

}  // namespace naglab
