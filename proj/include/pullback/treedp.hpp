#pragma once

#include <vector>

#include "pullback/rng.hpp"
#include "pullback/types.hpp"

// Single-root projective dependency trees over L tokens.
//
// Token 0 is the root. A tree is stored either as a 0/1 arc vector of length
// L*L (see ArcIndex) or as a head array heads[m] for m = 1..L (heads[0] unused).
// Exactly one token attaches to the root.

namespace pullback::treedp {

/// Largest sentence length for which exhaustive enumeration is offered publicly.
inline constexpr int kMaxEnumerateLength = 7;
/// Largest length for enumeration-backed backward passes.
inline constexpr int kMaxExactLength = 8;

/// Bijection between arcs (h, m), h in 0..L, m in 1..L, h != m, and 0..L*L-1.
class ArcIndex {
 public:
  explicit ArcIndex(int length);

  int length() const { return length_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(length_) * length_; }

  Eigen::Index index(int head, int modifier) const;
  int head(Eigen::Index arc) const;
  int modifier(Eigen::Index arc) const;

  /// Sentence length for an arc-vector size, or throws if size is not a square.
  static int length_for_size(Eigen::Index size);

 private:
  int length_;
};

using Heads = std::vector<int>;

Vector tree_from_heads(const Heads& heads);
Heads heads_from_tree(const Vector& tree);

/// Checks one head per modifier, single root, acyclicity and projectivity.
bool is_valid_heads(const Heads& heads);
bool is_valid_tree(const Vector& tree);

/// Entries in [0,1], each modifier's incoming mass and the root's outgoing mass
/// equal to one within tol.
bool is_tree_mean_point(const Vector& marginals, double tol = 1e-6);

/// All single-root projective trees of length L (1 <= L <= 7).
std::vector<Vector> enumerate_trees(int length);

/// Same as enumerate_trees as head arrays; cached, allows L up to kMaxExactLength.
const std::vector<Heads>& enumerate_heads(int length);

/// Highest-scoring tree by Eisner's algorithm, O(L^3).
///
/// Ties resolve to the first candidate in iteration order: split points are
/// scanned left to right and the root child is the leftmost maximiser.
Vector map_tree(const Vector& scores);
Heads map_heads(const Vector& scores);

struct Marginals {
  Vector marginals;
  double log_partition = 0.0;
};

/// Arc marginals of p(z) proportional to exp(s^T z), by log-space inside-outside.
Marginals marginals(const Vector& scores);

/// H^T g with H the Jacobian of marginals(s), computed exactly as the Gibbs
/// covariance of the arc indicators over the enumerated trees (L <= 8).
Vector marginals_vjp(const Vector& scores, const Vector& g);

/// map_tree(s + g) with an independent standard Gumbel g per arc.
Vector sample_perturb_map(const Vector& scores, Rng& rng);

/// Exact Gibbs sample by enumeration (L <= 8); a reference sampler for tests.
Vector sample_exact(const Vector& scores, Rng& rng);

}  // namespace pullback::treedp
