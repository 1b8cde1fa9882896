#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pullback {

/// Every real quantity in the library is 64-bit.
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when an argument violates an operation's precondition
/// (non-finite scores, mismatched lengths, bad hyperparameters).
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a request is well-formed but outside what the library
/// supports (enumeration beyond desk scale, SFE on structured spaces).
class Unsupported : public std::runtime_error {
 public:
  explicit Unsupported(const std::string& what) : std::runtime_error(what) {}
};

inline void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entry");
}

inline void require_same_length(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) {
    throw InvalidInput(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                       " vs " + std::to_string(b.size()) + ")");
  }
}

}  // namespace pullback
