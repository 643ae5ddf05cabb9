#pragma once

// Seeded Gaussian sampling. std::normal_distribution is implementation
// defined, so normals are drawn with the basic Box-Muller transform over
// std::mt19937_64, whose output sequence is fixed by the standard:
//
//   u1 = (x1 >> 11 + 1) * 2^-53          in (0, 1]
//   u2 = (x2 >> 11) * 2^-53              in [0, 1)
//   z0 = sqrt(-2 ln u1) cos(2 pi u2),  z1 = sqrt(-2 ln u1) sin(2 pi u2)
//
// z0 is returned first and z1 is cached for the next call. Matrices are
// filled in column-major order.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>

#include "naglab/matrix.hpp"

namespace naglab {

class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  double uniform_open_closed() {
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double standard_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open_closed();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double stddev) { return stddev * standard_normal(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev,
                              GaussianSource& source) {
  Matrix out(rows, cols);
  for (double& v : out.data()) v = source.normal(stddev);
  return out;
}

inline Vector gaussian_vector(std::size_t len, GaussianSource& source) {
  Vector out(len);
  for (double& v : out.data()) v = source.standard_normal();
  return out;
}

/// Mixes a base seed with a stream index (splitmix64 finalizer) so that
/// per-seed generators in a sweep do not share prefixes.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace naglab
