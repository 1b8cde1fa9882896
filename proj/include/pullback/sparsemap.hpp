#pragma once

#include <functional>
#include <vector>

#include "pullback/types.hpp"

namespace pullback::sparsemap {

/// argmax_{z in Z} s^T z over a fixed part indexing.
using MapOracle = std::function<Vector(const Vector&)>;

struct Options {
  int max_iter = 200;
  double tol = 1e-12;
};

/// Sparse representation of a point of the marginal polytope.
struct SparseSolution {
  Vector mean;
  std::vector<Vector> support;
  Vector weights;
  bool converged = false;
  int iterations = 0;
  /// Final duality gap max_z (s - mean)^T (z - mean).
  double gap = 0.0;
  /// Objective s^T mu - |mu|^2 / 2 after each outer iteration.
  std::vector<double> objective_trace;
};

/// argmax_{mu in conv(Z)} s^T mu - |mu|^2 / 2, i.e. the Euclidean projection
/// of s onto conv(Z), by the active-set method. Each outer iteration makes one
/// MAP call on the residual s - mu and re-solves the restricted problem on the
/// current support. An unconverged run returns its last (best) iterate with
/// `converged == false`.
SparseSolution solve(const Vector& s, const MapOracle& map_oracle, const Options& options = {});

/// Jacobian-vector product of the projection, restricted to the face spanned
/// by the support. Throws if the solution did not converge.
Vector vjp(const SparseSolution& solution, const Vector& g);

double objective(const Vector& s, const Vector& mu);

}  // namespace pullback::sparsemap
