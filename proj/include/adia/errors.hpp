#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace adia {

/// Bad input: lattice geometry, model parameters or options outside their domain.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The integrand has more than one pair of half-height crossings.
class MultiModalError : public NumericalError {
 public:
  MultiModalError(const std::string& what, std::vector<double> crossings)
      : NumericalError(what), crossings_(std::move(crossings)) {}

  const std::vector<double>& crossings() const noexcept { return crossings_; }

 private:
  std::vector<double> crossings_;
};

}  // namespace adia
