#pragma once

#include <vector>

#include "pullback/types.hpp"

// Slow reference implementations used to validate the fast paths. Each one
// works from an explicit list of structures and shares no code with the
// dynamic programs or the active-set solver.

namespace pullback::oracles {

/// Euclidean projection onto the simplex by trying every support set and
/// keeping the feasible candidate closest to v (K <= 16).
Vector simplex_projection_by_supports(const Vector& v);

/// Largest s^T z over the vertex list.
double best_vertex_score(const Vector& s, const std::vector<Vector>& vertices);

/// Exact Gibbs expectation sum_z p(z) z with p(z) proportional to exp(s^T z).
Vector gibbs_expectation(const Vector& s, const std::vector<Vector>& vertices);
double log_partition(const Vector& s, const std::vector<Vector>& vertices);

/// Nearest point of conv(vertices) to s, by Wolfe's minimum-norm-point
/// algorithm on the translated vertices.
struct NearestPoint {
  Vector point;
  /// Convex weights over `vertices` reproducing `point`.
  Vector weights;
  bool converged = false;
  int iterations = 0;
};
NearestPoint nearest_point_in_hull(const Vector& s, const std::vector<Vector>& vertices, int max_iter = 10000);

/// max_z (s - mu)^T (z - mu) over the vertex list. For a point mu of the hull,
/// |mu - proj(s)|^2 <= this gap, so a tiny value certifies the projection.
double projection_gap(const Vector& s, const Vector& mu, const std::vector<Vector>& vertices);

/// Distance from mu to conv(vertices); zero (up to round-off) for members.
double hull_membership_residual(const Vector& mu, const std::vector<Vector>& vertices);

}  // namespace pullback::oracles
