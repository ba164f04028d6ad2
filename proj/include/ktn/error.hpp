#pragma once

#include <stdexcept>
#include <string>

namespace ktn {

/// Bad input: dimensions, parameters, config. Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown: factorization, integrator, degenerate state. Exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDimension : public ValidationError {
 public:
  explicit InvalidDimension(int n)
      : ValidationError("invalid lattice dimension " + std::to_string(n) + " (expected 1 or 2)") {}
};

class LatticeMismatch : public ValidationError {
 public:
  LatticeMismatch() : ValidationError("operands live on different wavenumber lattices") {}
};

class ResolutionTooLow : public ValidationError {
 public:
  ResolutionTooLow(int g, int J)
      : ValidationError("grid resolution " + std::to_string(g) + " does not resolve J=" +
                        std::to_string(J) + " (need g > 2J)") {}
};

class ZeroVector : public ValidationError {
 public:
  ZeroVector() : ValidationError("zero coefficient vector") {}
};

class NotSkewHermitian : public ValidationError {
 public:
  explicit NotSkewHermitian(double defect)
      : ValidationError("generator is not skew-Hermitian (max |V + V^H| = " + std::to_string(defect) + ")") {}
};

class FactorizationFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IntegratorFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateState : public NumericalError {
 public:
  DegenerateState() : NumericalError("degenerate quantum state (xi^H xi below floor)") {}
};

}  // namespace ktn
