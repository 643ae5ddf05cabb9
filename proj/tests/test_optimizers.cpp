#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "support.hpp"

using namespace naglab;
using namespace naglab::testing;

namespace {

// l(w) = 1/2 (w - y)^2 as a one-layer 1x1 network with X = [1].
struct Scalar {
  double y;
  NetworkParams at(double w) const {
    return {{Arch::FC, 1, 1, 1, 1, 1}, {Matrix::from_rows({{w}})}, nullptr, {}};
  }
  GradFn grad() const {
    const double target = y;
    return [target](const NetworkParams& p) {
      return layer_gradients(p, Matrix::from_rows({{1.0}}), Matrix::from_rows({{target}}));
    };
  }
};

double w_of(const NetworkParams& p) { return p.hidden[0](0, 0); }

std::vector<NetworkParams> run(OptimizerKind kind, const NetworkParams& w0, double eta, double beta,
                               const GradFn& g, std::size_t steps) {
  std::vector<NetworkParams> traj{w0};
  NetworkParams p = w0;
  OptimizerState s = make_state(kind, eta, beta, w0);
  for (std::size_t t = 0; t < steps; ++t) {
    auto r = step(std::move(p), std::move(s), g);
    p = std::move(r.params);
    s = std::move(r.state);
    traj.push_back(p);
  }
  return traj;
}

struct Problem {
  NetworkParams w0;
  Dataset data;
  double eta;
  double beta;
  GradFn grad;
};

Problem problem(Arch arch, std::uint64_t seed) {
  const Dataset d = gen_dataset(1000 + seed, 5, 2, 5, 5, 3.0);
  const NetworkShape shape{arch, 3, 32, 5, 2, 5};
  Problem p{arch == Arch::FC ? init_fc_gaussian(shape, seed) : init_resnet(shape, {}, seed), d, 0, 0,
            nullptr};
  const TheoryBundle b =
      arch == Arch::FC ? fc_theory_bundle(d.X, 3, 2, 1.0) : res_theory_bundle(d.X, 3, 32, 1, 1, p.w0.A(), p.w0.B());
  p.eta = b.eta;
  p.beta = b.beta;
  p.grad = [X = d.X, Y = d.Y](const NetworkParams& q) { return layer_gradients(q, X, Y); };
  return p;
}

}  // namespace

TEST(Gd, ScalarHandIteration) {
  const Scalar s{1.0};
  const auto traj = run(OptimizerKind::GD, s.at(0.0), 0.5, 0.0, s.grad(), 2);
  EXPECT_DOUBLE_EQ(w_of(traj[1]), 0.5);
  EXPECT_DOUBLE_EQ(w_of(traj[2]), 0.75);
}

TEST(Gd, ZeroGradientLeavesParams) {
  const Scalar s{1.0};
  const auto p = s.at(0.3);
  const auto r = gd_step(p, make_state(OptimizerKind::GD, 0.5, 0.0, p), {Matrix(1, 1)});
  EXPECT_EQ(r.params.hidden, p.hidden);
}

TEST(Gd, NonFiniteGradientNamesLayer) {
  const auto p = init_fc_gaussian({Arch::FC, 2, 3, 2, 1, 1}, 0);
  LayerSet g{Matrix(3, 2), Matrix(1, 3)};
  g[1](0, 2) = std::numeric_limits<double>::quiet_NaN();
  try {
    gd_step(p, make_state(OptimizerKind::GD, 0.1, 0.0, p), g);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.layer(), 2u);
  }
}

TEST(Gd, DivergenceGuard) {
  const Scalar s{1.0};
  const auto p = s.at(0.0);
  EXPECT_THROW(gd_step(p, make_state(OptimizerKind::GD, 1.0, 0.0, p), {Matrix(1, 1, -2e12)}),
               DivergenceError);
}

TEST(Optimizers, StateValidation) {
  const Scalar s{1.0};
  EXPECT_THROW(make_state(OptimizerKind::GD, 0.0, 0.0, s.at(0)), ContractError);
  EXPECT_THROW(make_state(OptimizerKind::NagMomentum, 0.1, 1.5, s.at(0)), ContractError);
  EXPECT_THROW(gd_step(s.at(0), make_state(OptimizerKind::HeavyBall, 0.1, 0.5, s.at(0)), {Matrix(1, 1)}),
               ContractError);
  const auto st = make_state(OptimizerKind::NagMomentum, 0.1, 0.5, s.at(2.0));
  EXPECT_EQ(st.prev_params, s.at(2.0).hidden);
  for (const auto& m : st.momentum) EXPECT_EQ(m, Matrix(1, 1));
}

TEST(Nag, ScalarHandIterationBothForms) {
  // l = w^2 / 2, w_0 = 1, eta = 0.1, beta = 0.5.
  const Scalar s{0.0};
  for (auto kind : {OptimizerKind::NagTwoSequence, OptimizerKind::NagMomentum}) {
    const auto traj = run(kind, s.at(1.0), 0.1, 0.5, s.grad(), 2);
    EXPECT_NEAR(w_of(traj[1]), 0.9, 1e-15) << to_string(kind);
    EXPECT_NEAR(w_of(traj[2]), 0.765, 1e-15) << to_string(kind);
  }
}

TEST(Nag, MomentumBufferHandValue) {
  const Scalar s{0.0};
  auto r = nag_step_momentum(s.at(1.0), make_state(OptimizerKind::NagMomentum, 0.1, 0.5, s.at(1.0)), s.grad());
  EXPECT_NEAR(r.state.momentum[0](0, 0), -0.1, 1e-15);
  r = nag_step_momentum(r.params, r.state, s.grad());
  EXPECT_NEAR(r.state.momentum[0](0, 0), -0.135, 1e-15);
}

TEST(Nag, FormsAgreeOnNetworks) {
  for (Arch arch : {Arch::FC, Arch::ResNet})
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const Problem pr = problem(arch, seed);
      const auto a = run(OptimizerKind::NagTwoSequence, pr.w0, pr.eta, pr.beta, pr.grad, 100);
      const auto b = run(OptimizerKind::NagMomentum, pr.w0, pr.eta, pr.beta, pr.grad, 100);
      for (std::size_t t = 0; t <= 100; ++t)
        for (std::size_t l = 0; l < 3; ++l) {
          const double scale = 1.0 + frobenius_norm(b[t].hidden[l]);
          EXPECT_LE(frobenius_distance(a[t].hidden[l], b[t].hidden[l]), 1e-10 * scale)
              << to_string(arch) << " seed " << seed << " t " << t << " layer " << l + 1;
        }
    }
}

TEST(Nag, FirstStepEqualsGd) {
  for (Arch arch : {Arch::FC, Arch::ResNet}) {
    const Problem pr = problem(arch, 7);
    const auto gd = run(OptimizerKind::GD, pr.w0, pr.eta, 0.0, pr.grad, 1);
    for (auto kind : {OptimizerKind::NagTwoSequence, OptimizerKind::NagMomentum}) {
      const auto nag = run(kind, pr.w0, pr.eta, pr.beta, pr.grad, 1);
      EXPECT_EQ(nag[1].hidden, gd[1].hidden) << to_string(kind);
    }
  }
}

TEST(Optimizers, ZeroMomentumReducesToGd) {
  for (Arch arch : {Arch::FC, Arch::ResNet}) {
    const Problem pr = problem(arch, 3);
    const auto gd = run(OptimizerKind::GD, pr.w0, pr.eta, 0.0, pr.grad, 50);
    for (auto kind : {OptimizerKind::NagTwoSequence, OptimizerKind::NagMomentum, OptimizerKind::HeavyBall}) {
      const auto other = run(kind, pr.w0, pr.eta, 0.0, pr.grad, 50);
      for (std::size_t t = 0; t <= 50; ++t)
        for (std::size_t l = 0; l < 3; ++l)
          EXPECT_LE(frobenius_distance(other[t].hidden[l], gd[t].hidden[l]),
                    1e-14 * (1.0 + frobenius_norm(gd[t].hidden[l])))
              << to_string(kind) << " t " << t;
    }
  }
}

TEST(HeavyBall, ScalarHandIteration) {
  const Scalar s{0.0};
  const auto traj = run(OptimizerKind::HeavyBall, s.at(1.0), 0.1, 0.5, s.grad(), 2);
  EXPECT_NEAR(w_of(traj[1]), 0.9, 1e-15);
  EXPECT_NEAR(w_of(traj[2]), 0.76, 1e-15);
}

TEST(HeavyBall, ZeroGradientDecaysGeometrically) {
  const Scalar s{0.0};
  auto r = hb_step(s.at(1.0), make_state(OptimizerKind::HeavyBall, 0.1, 0.5, s.at(1.0)), {Matrix(1, 1, 1.0)});
  double prev = w_of(r.params);
  double kick = prev - 1.0;
  for (int t = 0; t < 10; ++t) {
    r = hb_step(r.params, r.state, {Matrix(1, 1)});
    const double inc = w_of(r.params) - prev;
    EXPECT_NEAR(inc, 0.5 * kick, 1e-15);
    kick = inc;
    prev = w_of(r.params);
  }
}

TEST(Optimizers, StepIsPure) {
  const Problem pr = problem(Arch::FC, 2);
  for (auto kind : {OptimizerKind::GD, OptimizerKind::NagTwoSequence, OptimizerKind::NagMomentum,
                    OptimizerKind::HeavyBall}) {
    auto r = step(pr.w0, make_state(kind, pr.eta, pr.beta, pr.w0), pr.grad);
    r = step(r.params, r.state, pr.grad);
    const OptimizerState frozen = r.state;
    const auto a = step(r.params, r.state, pr.grad);
    const auto b = step(r.params, r.state, pr.grad);
    EXPECT_EQ(r.state, frozen);
    EXPECT_EQ(a.params.hidden, b.params.hidden);
    EXPECT_EQ(a.state, b.state);
  }
}

TEST(Optimizers, ResNetMapsUntouched) {
  const Problem pr = problem(Arch::ResNet, 4);
  const Matrix A = pr.w0.A(), B = pr.w0.B();
  const auto traj = run(OptimizerKind::NagMomentum, pr.w0, pr.eta, pr.beta, pr.grad, 20);
  EXPECT_EQ(traj.back().A(), A);
  EXPECT_EQ(traj.back().B(), B);
}
