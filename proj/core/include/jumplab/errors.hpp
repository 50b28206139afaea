#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace jumplab {

/// Invalid mathematical input: diagonal kernel arguments, non-finite points.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A configuration or precondition violation detected before computing.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to meet its tolerance. Carries the last
/// partial value so callers can still report it.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double partial, double residual = 0.0)
      : std::runtime_error(what), partial_(partial), residual_(residual) {}

  double partial_value() const noexcept { return partial_; }
  double residual() const noexcept { return residual_; }

 private:
  double partial_;
  double residual_;
};

/// The literal cell-pair integral does not converge for a touching pair.
class DivergentEntryError : public NumericError {
 public:
  DivergentEntryError(const std::string& what, std::size_t row, std::size_t col, double partial)
      : NumericError(what, partial), row_(row), col_(col) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

/// Problem size exceeds what a dense method is allowed to handle.
class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Too few usable samples for a statistical fit.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace jumplab
