#pragma once

#include <stdexcept>
#include <string>

namespace stagpatch {

// Invalid user-supplied parameters (grid sizes, ratios, coefficients).
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// Violated API preconditions between library components.
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// Failures of a numerical computation (non-convergence, blow-up, NaN).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace stagpatch
