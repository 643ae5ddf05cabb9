#pragma once

// Deep linear networks.
//
//   FC:     U = (m^{L-1} d_y)^{-1/2} W^L ... W^1 X
//   RESNET: U = B (I + W^L) ... (I + W^1) A X,  A and B frozen at init
//
// Both are handled through one view: an input map (X or AX), a list of
// effective layers E^l (W^l or I + W^l), an output map (I or B) and a scalar
// scale. Every downstream formula (gradients, gram matrices, the residual
// audit) is written once against that view.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "naglab/errors.hpp"
#include "naglab/matrix.hpp"
#include "naglab/random.hpp"

namespace naglab {

enum class Arch { FC, ResNet };

inline std::string_view to_string(Arch a) { return a == Arch::FC ? "FC" : "RESNET"; }

inline Arch arch_from_string(std::string_view s) {
  if (s == "FC") return Arch::FC;
  if (s == "RESNET") return Arch::ResNet;
  throw ContractError("unknown architecture '" + std::string(s) + "'");
}

struct NetworkShape {
  Arch arch = Arch::FC;
  std::size_t L = 1;
  std::size_t m = 1;
  std::size_t d_x = 1;
  std::size_t d_y = 1;
  std::size_t n = 1;

  void validate() const {
    if (L < 1) throw ContractError("NetworkShape: L must be >= 1");
    if (m < 1) throw ContractError("NetworkShape: m must be >= 1");
    if (d_x < 1 || d_y < 1) throw ContractError("NetworkShape: d_x and d_y must be >= 1");
  }

  /// (rows, cols) of hidden layer l (1-based).
  std::pair<std::size_t, std::size_t> layer_shape(std::size_t l) const {
    if (arch == Arch::ResNet) return {m, m};
    if (L == 1) return {d_y, d_x};
    if (l == 1) return {m, d_x};
    if (l == L) return {d_y, m};
    return {m, m};
  }

  /// FC output scaling 1/sqrt(m^{L-1} d_y); 1 for RESNET.
  double output_scale() const {
    if (arch == Arch::ResNet) return 1.0;
    return 1.0 / std::sqrt(std::pow(static_cast<double>(m), static_cast<double>(L - 1)) *
                           static_cast<double>(d_y));
  }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (std::size_t l = 1; l <= L; ++l) {
      const auto [r, c] = layer_shape(l);
      total += r * c;
    }
    return total;
  }

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

struct ResNetInitConfig {
  double alpha = 1.0;  // std-dev of A entries
  double gamma = 1.0;  // std-dev of B entries

  void validate() const {
    if (!(alpha > 0.0) || !(gamma > 0.0))
      throw ContractError("ResNetInitConfig: alpha and gamma must be positive");
  }
};

/// Frozen input/output maps of a linear ResNet.
struct ResNetMaps {
  Matrix A;  // m x d_x
  Matrix B;  // d_y x m
};

struct NetworkParams {
  NetworkShape shape;
  LayerSet hidden;
  std::shared_ptr<const ResNetMaps> io;  // present iff RESNET
  std::optional<std::uint64_t> seed;

  const Matrix& A() const { return require_io().A; }
  const Matrix& B() const { return require_io().B; }

  void validate() const {
    shape.validate();
    if (hidden.size() != shape.L)
      throw DimensionError("NetworkParams: " + std::to_string(hidden.size()) + " layers for L=" +
                           std::to_string(shape.L));
    for (std::size_t l = 1; l <= shape.L; ++l) {
      const auto [r, c] = shape.layer_shape(l);
      if (hidden[l - 1].rows() != r || hidden[l - 1].cols() != c)
        throw DimensionError("NetworkParams: layer " + std::to_string(l) + " is " +
                             hidden[l - 1].shape_string() + ", expected " + std::to_string(r) +
                             "x" + std::to_string(c));
    }
    if ((shape.arch == Arch::ResNet) != static_cast<bool>(io))
      throw ContractError("NetworkParams: A/B present iff arch is RESNET");
    if (io) {
      if (io->A.rows() != shape.m || io->A.cols() != shape.d_x)
        throw DimensionError("NetworkParams: A is " + io->A.shape_string());
      if (io->B.rows() != shape.d_y || io->B.cols() != shape.m)
        throw DimensionError("NetworkParams: B is " + io->B.shape_string());
    }
  }

 private:
  const ResNetMaps& require_io() const {
    if (!io) throw ContractError("NetworkParams: A/B requested on a FC network");
    return *io;
  }
};

/// Labelled data with an exact linear teacher, Y = W_star X.
struct Dataset {
  Matrix X;       // d_x x n
  Matrix Y;       // d_y x n
  Matrix W_star;  // d_y x d_x
  std::size_t r = 0;
};

inline NetworkParams init_fc_gaussian(const NetworkShape& shape, std::uint64_t seed) {
  shape.validate();
  if (shape.arch != Arch::FC) throw ContractError("init_fc_gaussian: shape is not FC");
  GaussianSource source(seed);
  NetworkParams p{shape, {}, nullptr, seed};
  p.hidden.reserve(shape.L);
  for (std::size_t l = 1; l <= shape.L; ++l) {
    const auto [r, c] = shape.layer_shape(l);
    p.hidden.push_back(gaussian_matrix(r, c, 1.0, source));
  }
  return p;
}

inline NetworkParams init_resnet(const NetworkShape& shape, const ResNetInitConfig& cfg,
                                 std::uint64_t seed) {
  shape.validate();
  cfg.validate();
  if (shape.arch != Arch::ResNet) throw ContractError("init_resnet: shape is not RESNET");
  GaussianSource source(seed);
  auto maps = std::make_shared<ResNetMaps>();
  maps->A = gaussian_matrix(shape.m, shape.d_x, cfg.alpha, source);
  maps->B = gaussian_matrix(shape.d_y, shape.m, cfg.gamma, source);
  NetworkParams p{shape, LayerSet(shape.L, Matrix(shape.m, shape.m)), std::move(maps), seed};
  return p;
}

/// E^l = W^l (FC) or I + W^l (RESNET).
inline LayerSet effective_layers(const NetworkShape& shape, const LayerSet& hidden) {
  LayerSet out = hidden;
  if (shape.arch == Arch::ResNet)
    for (auto& w : out)
      for (std::size_t i = 0; i < w.rows(); ++i) w(i, i) += 1.0;
  return out;
}

/// Per-layer factorization of the network around a data matrix:
///   U = scale * tops[l] * E^l * inputs[l]   for every l,
/// with inputs[l] = E^{l-1:1} In X and tops[l] = Out E^{L:l+1}.
struct NetworkView {
  double scale = 1.0;
  LayerSet effective;
  LayerSet inputs;
  LayerSet tops;
  Matrix output;  // U
};

inline NetworkView make_view(const NetworkParams& p, const Matrix& X) {
  const auto& s = p.shape;
  if (X.rows() != s.d_x)
    throw DimensionError("network input: X is " + X.shape_string() + ", expected " +
                         std::to_string(s.d_x) + " rows");
  NetworkView v;
  v.scale = s.output_scale();
  v.effective = effective_layers(s, p.hidden);
  const std::size_t L = s.L;
  v.inputs.resize(L);
  v.tops.resize(L);
  v.inputs[0] = s.arch == Arch::ResNet ? matmul(p.A(), X) : X;
  for (std::size_t l = 1; l < L; ++l) v.inputs[l] = matmul(v.effective[l - 1], v.inputs[l - 1]);
  v.tops[L - 1] = s.arch == Arch::ResNet ? p.B() : Matrix::identity(s.d_y);
  for (std::size_t l = L - 1; l-- > 0;) v.tops[l] = matmul(v.tops[l + 1], v.effective[l + 1]);
  v.output = matmul(v.tops[L - 1], matmul(v.effective[L - 1], v.inputs[L - 1]));
  v.output *= v.scale;
  return v;
}

inline Matrix forward(const NetworkParams& p, const Matrix& X) {
  const auto& s = p.shape;
  if (X.rows() != s.d_x)
    throw DimensionError("forward: X is " + X.shape_string() + ", expected " +
                         std::to_string(s.d_x) + " rows");
  if (s.arch == Arch::FC) {
    Matrix z = X;
    for (const auto& w : p.hidden) z = matmul(w, z);
    return z * s.output_scale();
  }
  Matrix z = matmul(p.A(), X);
  for (const auto& w : p.hidden) z += matmul(w, z);
  return matmul(p.B(), z);
}

/// 1/2 ||U - Y||_F^2.
inline double loss(const Matrix& U, const Matrix& Y) {
  if (U.rows() != Y.rows() || U.cols() != Y.cols())
    throw DimensionError("loss: U is " + U.shape_string() + ", Y is " + Y.shape_string());
  const double d = frobenius_distance(U, Y);
  return 0.5 * d * d;
}

/// dl/dW^l = scale * tops[l]^T (U - Y) inputs[l]^T, shaped like W^l.
inline LayerSet layer_gradients(const NetworkView& v, const Matrix& Y) {
  const Matrix residual = v.output - Y;
  LayerSet grads;
  grads.reserve(v.effective.size());
  for (std::size_t l = 0; l < v.effective.size(); ++l) {
    Matrix g = matmul_nt(matmul_tn(v.tops[l], residual), v.inputs[l]);
    g *= v.scale;
    grads.push_back(std::move(g));
  }
  return grads;
}

inline LayerSet layer_gradients(const NetworkParams& p, const Matrix& X, const Matrix& Y) {
  const auto v = make_view(p, X);
  if (Y.rows() != v.output.rows() || Y.cols() != v.output.cols())
    throw DimensionError("layer_gradients: Y is " + Y.shape_string() + ", U is " +
                         v.output.shape_string());
  return layer_gradients(v, Y);
}

}  // namespace naglab
