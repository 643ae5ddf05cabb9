#pragma once

// First-order methods over the trainable layers of a NetworkParams.
// All step functions are pure: they take params and state by value and
// return the successors.
//
//   GD         w+ = w - eta g(w)
//   NAG (v,w)  v+ = w - eta g(w);  w+ = v+ + beta (v+ - v)
//   NAG (M)    M  = beta M- - eta beta (g(w) - g(w-)) - eta g(w);  w+ = w + M
//   HB         w+ = w - eta g(w) + beta (w - w-)
//
// Initial conditions: w_{-1} = w_0, M_{-1} = 0. The two-sequence form takes
// v_0 = w_{-1} - eta g(w_{-1}) = w_0 - eta g(w_0), the v-iterate the
// recursion itself assigns to w_{-1}; with it the first step of both NAG
// forms is a GD step and the forms agree for all t. Starting from the
// literal v_0 = w_0 instead would give w_1 = w_0 - eta (1 + beta) g(w_0).

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <utility>

#include "naglab/errors.hpp"
#include "naglab/matrix.hpp"
#include "naglab/models.hpp"

namespace naglab {

enum class OptimizerKind { GD, NagTwoSequence, NagMomentum, HeavyBall };

inline std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::GD: return "GD";
    case OptimizerKind::NagTwoSequence: return "NAG_TWO_SEQUENCE";
    case OptimizerKind::NagMomentum: return "NAG_MOMENTUM";
    case OptimizerKind::HeavyBall: return "HB";
  }
  return "?";
}

inline OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "GD") return OptimizerKind::GD;
  if (s == "NAG_TWO_SEQUENCE") return OptimizerKind::NagTwoSequence;
  if (s == "NAG_MOMENTUM" || s == "NAG") return OptimizerKind::NagMomentum;
  if (s == "HB") return OptimizerKind::HeavyBall;
  throw ContractError("unknown optimizer '" + std::string(s) + "'");
}

inline bool is_nag(OptimizerKind k) {
  return k == OptimizerKind::NagTwoSequence || k == OptimizerKind::NagMomentum;
}

inline constexpr double kDivergenceNorm = 1e12;

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::GD;
  double eta = 0.0;
  double beta = 0.0;
  LayerSet prev_params;  // w_{t-1}
  LayerSet momentum;     // M_{t-1}
  LayerSet aux_v;        // v_t, two-sequence NAG only; empty before the first step
  LayerSet prev_grad;    // g(w_{t-1}), momentum NAG only; empty before the first step
  std::size_t t = 0;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

using GradFn = std::function<LayerSet(const NetworkParams&)>;

struct StepResult {
  NetworkParams params;
  OptimizerState state;
};

inline OptimizerState make_state(OptimizerKind kind, double eta, double beta,
                                 const NetworkParams& params) {
  if (!(eta > 0.0)) throw ContractError("optimizer: eta must be > 0");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ContractError("optimizer: beta must lie in [0, 1]");
  OptimizerState s;
  s.kind = kind;
  s.eta = eta;
  s.beta = beta;
  s.prev_params = params.hidden;
  s.momentum.reserve(params.hidden.size());
  for (const auto& w : params.hidden) s.momentum.emplace_back(w.rows(), w.cols());
  return s;
}

namespace detail {

inline void require_kind(const OptimizerState& s, OptimizerKind k) {
  if (s.kind != k)
    throw ContractError("optimizer: state kind " + std::string(to_string(s.kind)) +
                        " passed to " + std::string(to_string(k)) + " step");
}

inline void check_gradients(const NetworkParams& p, const LayerSet& grads) {
  if (grads.size() != p.hidden.size())
    throw DimensionError("optimizer: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(p.hidden.size()) + " layers");
  for (std::size_t l = 0; l < grads.size(); ++l) {
    if (grads[l].rows() != p.hidden[l].rows() || grads[l].cols() != p.hidden[l].cols())
      throw DimensionError("optimizer: gradient " + grads[l].shape_string() + " for layer " +
                           p.hidden[l].shape_string());
    if (!grads[l].all_finite()) throw DivergenceError("non-finite gradient", l + 1);
  }
}

inline void check_params(const LayerSet& ws) {
  for (std::size_t l = 0; l < ws.size(); ++l) {
    const double f = frobenius_norm(ws[l]);
    if (!std::isfinite(f) || f > kDivergenceNorm)
      throw DivergenceError("parameter norm exceeded divergence guard", l + 1);
  }
}

}  // namespace detail

inline StepResult gd_step(NetworkParams params, OptimizerState state, const LayerSet& grads) {
  detail::require_kind(state, OptimizerKind::GD);
  detail::check_gradients(params, grads);
  state.prev_params = params.hidden;
  for (std::size_t l = 0; l < grads.size(); ++l) params.hidden[l] -= grads[l] * state.eta;
  detail::check_params(params.hidden);
  ++state.t;
  return {std::move(params), std::move(state)};
}

inline StepResult nag_step_two_sequence(NetworkParams params, OptimizerState state,
                                        const GradFn& grad_fn) {
  detail::require_kind(state, OptimizerKind::NagTwoSequence);
  const LayerSet grads = grad_fn(params);
  detail::check_gradients(params, grads);
  if (state.aux_v.empty())
    for (std::size_t l = 0; l < grads.size(); ++l)
      state.aux_v.push_back(params.hidden[l] - grads[l] * state.eta);
  state.prev_params = params.hidden;
  for (std::size_t l = 0; l < grads.size(); ++l) {
    Matrix v_next = params.hidden[l] - grads[l] * state.eta;
    Matrix w_next = v_next + (v_next - state.aux_v[l]) * state.beta;
    state.momentum[l] = w_next - params.hidden[l];
    params.hidden[l] = std::move(w_next);
    state.aux_v[l] = std::move(v_next);
  }
  detail::check_params(params.hidden);
  ++state.t;
  return {std::move(params), std::move(state)};
}

inline StepResult nag_step_momentum(NetworkParams params, OptimizerState state,
                                    const GradFn& grad_fn) {
  detail::require_kind(state, OptimizerKind::NagMomentum);
  LayerSet grads = grad_fn(params);
  detail::check_gradients(params, grads);
  // w_{-1} = w_0, so the previous gradient at t = 0 is the current one.
  const LayerSet& prev = state.prev_grad.empty() ? grads : state.prev_grad;
  const double eta = state.eta;
  const double beta = state.beta;
  state.prev_params = params.hidden;
  for (std::size_t l = 0; l < grads.size(); ++l) {
    Matrix m = state.momentum[l] * beta - (grads[l] - prev[l]) * (eta * beta) - grads[l] * eta;
    params.hidden[l] += m;
    state.momentum[l] = std::move(m);
  }
  state.prev_grad = std::move(grads);
  detail::check_params(params.hidden);
  ++state.t;
  return {std::move(params), std::move(state)};
}

inline StepResult hb_step(NetworkParams params, OptimizerState state, const LayerSet& grads) {
  detail::require_kind(state, OptimizerKind::HeavyBall);
  detail::check_gradients(params, grads);
  for (std::size_t l = 0; l < grads.size(); ++l) {
    Matrix step = (params.hidden[l] - state.prev_params[l]) * state.beta - grads[l] * state.eta;
    state.prev_params[l] = params.hidden[l];
    params.hidden[l] += step;
    state.momentum[l] = std::move(step);
  }
  detail::check_params(params.hidden);
  ++state.t;
  return {std::move(params), std::move(state)};
}

/// Dispatches on state.kind; GD and HB evaluate grad_fn once up front.
inline StepResult step(NetworkParams params, OptimizerState state, const GradFn& grad_fn) {
  switch (state.kind) {
    case OptimizerKind::GD: {
      const LayerSet g = grad_fn(params);
      return gd_step(std::move(params), std::move(state), g);
    }
    case OptimizerKind::HeavyBall: {
      const LayerSet g = grad_fn(params);
      return hb_step(std::move(params), std::move(state), g);
    }
    case OptimizerKind::NagTwoSequence:
      return nag_step_two_sequence(std::move(params), std::move(state), grad_fn);
    case OptimizerKind::NagMomentum:
      return nag_step_momentum(std::move(params), std::move(state), grad_fn);
  }
  throw ContractError("optimizer: unknown kind");
}

}  // namespace naglab
