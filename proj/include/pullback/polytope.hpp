#pragma once

#include <memory>

#include "pullback/rng.hpp"
#include "pullback/sparsemap.hpp"
#include "pullback/types.hpp"

namespace pullback {

/// The inference building blocks of one latent space Z: MAP, marginals
/// (expectation under the Gibbs distribution), Euclidean projection onto
/// conv(Z), perturbation sampling, and their backward passes.
class PolytopeOracle {
 public:
  virtual ~PolytopeOracle() = default;

  virtual bool structured() const = 0;

  /// argmax_{z in Z} s^T z.
  virtual Vector map(const Vector& s) const = 0;
  /// E_{p(z) ~ exp(s^T z)}[z].
  virtual Vector marg(const Vector& s) const = 0;
  virtual Vector marg_vjp(const Vector& s, const Vector& g) const = 0;
  /// Euclidean projection of v onto conv(Z).
  virtual sparsemap::SparseSolution project(const Vector& v) const = 0;
  virtual Vector project_vjp(const sparsemap::SparseSolution& solution, const Vector& g) const = 0;

  /// s plus one independent standard Gumbel per coordinate.
  Vector perturb(const Vector& s, Rng& rng) const { return s + rng.gumbel_vector(s.size()); }
  /// Perturb-and-MAP draw.
  Vector sample(const Vector& s, Rng& rng) const { return map(perturb(s, rng)); }

  virtual bool is_vertex(const Vector& z) const = 0;
  virtual bool is_mean_point(const Vector& mu, double tol) const = 0;
};

/// Unstructured case: Z = {e_1..e_K}, conv(Z) the probability simplex.
class SimplexOracle final : public PolytopeOracle {
 public:
  bool structured() const override { return false; }
  Vector map(const Vector& s) const override;
  Vector marg(const Vector& s) const override;
  Vector marg_vjp(const Vector& s, const Vector& g) const override;
  sparsemap::SparseSolution project(const Vector& v) const override;
  Vector project_vjp(const sparsemap::SparseSolution& solution, const Vector& g) const override;
  bool is_vertex(const Vector& z) const override;
  bool is_mean_point(const Vector& mu, double tol) const override;
};

/// Single-root projective dependency trees; projection by active-set SparseMAP.
class TreeOracle final : public PolytopeOracle {
 public:
  explicit TreeOracle(sparsemap::Options options = {}) : options_(options) {}

  bool structured() const override { return true; }
  Vector map(const Vector& s) const override;
  Vector marg(const Vector& s) const override;
  Vector marg_vjp(const Vector& s, const Vector& g) const override;
  sparsemap::SparseSolution project(const Vector& v) const override;
  Vector project_vjp(const sparsemap::SparseSolution& solution, const Vector& g) const override;
  bool is_vertex(const Vector& z) const override;
  bool is_mean_point(const Vector& mu, double tol) const override;

 private:
  sparsemap::Options options_;
};

}  // namespace pullback
