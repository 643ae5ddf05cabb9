#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace naglab {

/// Operand shapes do not conform.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition or structural contract was violated by the caller.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative numeric routine did not reach its tolerance.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// An optimizer step produced non-finite or runaway parameters.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t layer)
      : std::runtime_error(what + " (layer " + std::to_string(layer) + ")"), layer_(layer) {}
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

/// The residual-dynamics identity failed to close at some iteration.
class AuditError : public std::runtime_error {
 public:
  AuditError(std::size_t t, double residual)
      : std::runtime_error("residual-dynamics identity failed at t=" + std::to_string(t) +
                           " (residual " + std::to_string(residual) + ")"),
        t_(t),
        residual_(residual) {}
  std::size_t t() const noexcept { return t_; }
  double residual() const noexcept { return residual_; }

 private:
  std::size_t t_;
  double residual_;
};

/// A gram matrix would exceed the materialization cap; use GramOperator instead.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace naglab
