#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace naglab;
using namespace naglab::testing;

namespace {

NetworkShape fc(std::size_t L, std::size_t m, std::size_t dx, std::size_t dy, std::size_t n) {
  return {Arch::FC, L, m, dx, dy, n};
}
NetworkShape res(std::size_t L, std::size_t m, std::size_t dx, std::size_t dy, std::size_t n) {
  return {Arch::ResNet, L, m, dx, dy, n};
}

}  // namespace

TEST(Shape, LayerShapes) {
  const auto s = fc(3, 8, 5, 2, 4);
  EXPECT_EQ(s.layer_shape(1), (std::pair<std::size_t, std::size_t>{8, 5}));
  EXPECT_EQ(s.layer_shape(2), (std::pair<std::size_t, std::size_t>{8, 8}));
  EXPECT_EQ(s.layer_shape(3), (std::pair<std::size_t, std::size_t>{2, 8}));
  EXPECT_EQ(fc(1, 8, 5, 2, 4).layer_shape(1), (std::pair<std::size_t, std::size_t>{2, 5}));
  EXPECT_EQ(res(3, 8, 5, 2, 4).layer_shape(2), (std::pair<std::size_t, std::size_t>{8, 8}));
  EXPECT_THROW(fc(0, 8, 5, 2, 4).validate(), ContractError);
}

TEST(InitFc, SameSeedBitIdentical) {
  const auto s = fc(3, 16, 4, 2, 4);
  const auto a = init_fc_gaussian(s, 7), b = init_fc_gaussian(s, 7);
  EXPECT_EQ(a.hidden, b.hidden);
  EXPECT_NE(a.hidden, init_fc_gaussian(s, 8).hidden);
}

TEST(InitFc, MomentsAtWidth400) {
  // Three 400x400 layers: 480k samples.
  const auto p = init_fc_gaussian(fc(3, 400, 400, 400, 1), 1);
  double n = 0, s1 = 0, s2 = 0, s3 = 0;
  for (const auto& w : p.hidden)
    for (double v : w.values()) {
      n += 1;
      s1 += v;
    }
  const double mean = s1 / n;
  for (const auto& w : p.hidden)
    for (double v : w.values()) {
      s2 += (v - mean) * (v - mean);
      s3 += (v - mean) * (v - mean) * (v - mean);
    }
  const double var = s2 / n;
  const double skew = (s3 / n) / std::pow(var, 1.5);
  EXPECT_EQ(n, 480000);
  EXPECT_LT(std::abs(mean), 0.02);
  EXPECT_LT(std::abs(var - 1.0), 0.02);
  EXPECT_LT(std::abs(skew), 0.05);
}

TEST(InitResNet, HiddenLayersExactlyZero) {
  for (std::uint64_t seed : {0, 1, 99}) {
    const auto p = init_resnet(res(3, 12, 4, 2, 3), {}, seed);
    for (const auto& w : p.hidden)
      for (double v : w.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(InitResNet, ScalesFollowConfig) {
  const auto p = init_resnet(res(1, 500, 400, 400, 1), {0.5, 2.0}, 4);
  auto var = [](const Matrix& a) {
    double s = 0;
    for (double v : a.values()) s += v * v;
    return s / static_cast<double>(a.size());
  };
  EXPECT_NEAR(var(p.A()), 0.25, 0.25 * 0.02);
  EXPECT_NEAR(var(p.B()), 4.0, 4.0 * 0.02);
  EXPECT_THROW(init_resnet(res(1, 4, 2, 2, 1), {0.0, 1.0}, 0), ContractError);
}

TEST(Forward, FcSingleLayerUnitScale) {
  NetworkParams p{fc(1, 1, 2, 1, 2), {Matrix::from_rows({{1, 0}})}, nullptr, {}};
  EXPECT_EQ(forward(p, Matrix::identity(2)), Matrix::from_rows({{1, 0}}));
}

TEST(Forward, FcTwoLayerAllOnes) {
  NetworkParams p{fc(2, 2, 2, 1, 2), {Matrix(2, 2, 1.0), Matrix(1, 2, 1.0)}, nullptr, {}};
  const Matrix u = forward(p, Matrix::identity(2));
  EXPECT_NEAR(u(0, 0), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(u(0, 1), std::sqrt(2.0), 1e-15);
}

TEST(Forward, ResNetAtInitIsBAX) {
  const auto p = init_resnet(res(3, 10, 4, 2, 5), {}, 3);
  GaussianSource src(1);
  const Matrix X = random_matrix(4, 5, src);
  EXPECT_LE(rel_diff(forward(p, X), naive_matmul(p.B(), naive_matmul(p.A(), X))), 1e-14);
}

TEST(Forward, MatchesNaiveAndView) {
  GaussianSource src(2);
  for (auto shape : {fc(3, 6, 4, 2, 5), fc(1, 6, 4, 3, 5), res(3, 6, 4, 2, 5)}) {
    const auto p = random_network(shape, 5);
    const Matrix X = random_matrix(4, 5, src);
    EXPECT_LE(rel_diff(forward(p, X), naive_forward(p, X)), 1e-13);
    const auto v = make_view(p, X);
    EXPECT_LE(rel_diff(v.output, naive_forward(p, X)), 1e-13);
    for (std::size_t l = 0; l < shape.L; ++l) {
      const Matrix recon = naive_matmul(v.tops[l], naive_matmul(v.effective[l], v.inputs[l])) * v.scale;
      EXPECT_LE(rel_diff(recon, v.output), 1e-13) << "layer " << l + 1;
    }
  }
  EXPECT_THROW(forward(init_fc_gaussian(fc(2, 3, 4, 1, 2), 0), Matrix(3, 2)), DimensionError);
}

TEST(Forward, HomogeneousOfDegreeL) {
  GaussianSource src(3);
  for (std::size_t L = 1; L <= 3; ++L) {
    const auto p = init_fc_gaussian(fc(L, 5, 3, 2, 4), L);
    const Matrix X = random_matrix(3, 4, src);
    NetworkParams q = p;
    for (auto& w : q.hidden) w *= 2.0;
    EXPECT_LE(rel_diff(forward(q, X), forward(p, X) * std::pow(2.0, static_cast<double>(L))), 1e-12);
  }
}

TEST(Loss, Examples) {
  EXPECT_EQ(loss(Matrix::identity(2), Matrix::identity(2)), 0.0);
  EXPECT_DOUBLE_EQ(loss(Matrix::from_rows({{3}, {4}}), Matrix(2, 1)), 12.5);
  GaussianSource src(4);
  const Matrix u = random_matrix(3, 5, src), y = random_matrix(3, 5, src);
  double s = 0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) s += (u(i, j) - y(i, j)) * (u(i, j) - y(i, j));
  EXPECT_NEAR(loss(u, y), 0.5 * s, 1e-14 * s);
  EXPECT_THROW(loss(Matrix(2, 2), Matrix(2, 3)), DimensionError);
}

TEST(Gradients, ZeroAtInterpolation) {
  const auto p = random_network(fc(3, 4, 3, 2, 5), 1);
  GaussianSource src(5);
  const Matrix X = random_matrix(3, 5, src);
  for (const auto& g : layer_gradients(p, X, forward(p, X)))
    for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(Gradients, ScalarCalculus) {
  const double w = 1.5, x = -2.0, y = 0.25;
  NetworkParams p{fc(1, 1, 1, 1, 1), {Matrix::from_rows({{w}})}, nullptr, {}};
  const auto g = layer_gradients(p, Matrix::from_rows({{x}}), Matrix::from_rows({{y}}));
  EXPECT_DOUBLE_EQ(g[0](0, 0), (w * x - y) * x);
}

TEST(Gradients, FiniteDifferencesBothArchitectures) {
  for (Arch arch : {Arch::FC, Arch::ResNet}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      // Up to ~400 parameters: L in {1,2,3}, m in {3,...,8}.
      const std::size_t L = 1 + seed % 3, m = 3 + seed % 6, dx = 2 + seed % 3, dy = 1 + seed % 2,
                        n = 2 + seed % 4;
      const NetworkShape shape{arch, L, m, dx, dy, n};
      ASSERT_LE(shape.parameter_count(), 500u);
      const auto p = random_network(shape, 100 + seed, 0.3);
      const auto d = sample_dataset(dx, dy, n, 200 + seed);
      const auto analytic = layer_gradients(p, d.X, d.Y);
      const auto numeric = fd_gradients(p, d.X, d.Y);
      for (std::size_t l = 0; l < L; ++l)
        EXPECT_LE(rel_diff(analytic[l], numeric[l]), 1e-6)
            << to_string(arch) << " seed " << seed << " layer " << l + 1;
    }
  }
}
