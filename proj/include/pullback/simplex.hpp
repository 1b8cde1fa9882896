#pragma once

#include <vector>

#include "pullback/types.hpp"

// Categorical geometry: maps from a score vector onto the probability simplex
// and the matching vector-Jacobian products.

namespace pullback::simplex {

/// One-hot vertex of the largest score. Ties go to the lowest index.
Vector argmax_onehot(const Vector& s);

/// Index form of argmax_onehot.
Eigen::Index argmax_index(const Vector& s);

/// Max-shifted softmax.
Vector softmax(const Vector& s);

/// Euclidean projection onto the simplex (sort and threshold).
Vector sparsemax(const Vector& s);

/// J^T g with J = diag(p) - p p^T at p = softmax(s).
Vector softmax_vjp(const Vector& s, const Vector& g);

/// J^T g for sparsemax: centre g on the support, zero elsewhere.
Vector sparsemax_vjp(const Vector& s, const Vector& g);

/// Indices with strictly positive sparsemax mass.
std::vector<Eigen::Index> sparsemax_support(const Vector& p);

/// Nonnegative entries summing to one within tol.
bool is_simplex_point(const Vector& p, double tol = 1e-9);

/// A 0/1 vector with exactly one 1.
bool is_vertex(const Vector& z);

}  // namespace pullback::simplex
