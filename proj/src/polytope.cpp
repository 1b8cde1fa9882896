#include "pullback/polytope.hpp"

#include "pullback/simplex.hpp"
#include "pullback/treedp.hpp"

namespace pullback {

Vector SimplexOracle::map(const Vector& s) const { return simplex::argmax_onehot(s); }

Vector SimplexOracle::marg(const Vector& s) const { return simplex::softmax(s); }

Vector SimplexOracle::marg_vjp(const Vector& s, const Vector& g) const { return simplex::softmax_vjp(s, g); }

sparsemap::SparseSolution SimplexOracle::project(const Vector& v) const {
  sparsemap::SparseSolution sol;
  sol.mean = simplex::sparsemax(v);
  const auto support = simplex::sparsemax_support(sol.mean);
  sol.weights.resize(static_cast<Eigen::Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) {
    Vector e = Vector::Zero(v.size());
    e[support[i]] = 1.0;
    sol.support.push_back(std::move(e));
    sol.weights[static_cast<Eigen::Index>(i)] = sol.mean[support[i]];
  }
  sol.converged = true;
  sol.objective_trace.push_back(sparsemap::objective(v, sol.mean));
  return sol;
}

Vector SimplexOracle::project_vjp(const sparsemap::SparseSolution& solution, const Vector& g) const {
  require_same_length(solution.mean, g, "sparsemax_vjp");
  Vector out = Vector::Zero(g.size());
  double mean = 0.0;
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < solution.mean.size(); ++i)
    if (solution.mean[i] > 0.0) support.push_back(i);
  for (auto i : support) mean += g[i];
  mean /= static_cast<double>(support.size());
  for (auto i : support) out[i] = g[i] - mean;
  return out;
}

bool SimplexOracle::is_vertex(const Vector& z) const { return simplex::is_vertex(z); }

bool SimplexOracle::is_mean_point(const Vector& mu, double tol) const { return simplex::is_simplex_point(mu, tol); }

Vector TreeOracle::map(const Vector& s) const { return treedp::map_tree(s); }

Vector TreeOracle::marg(const Vector& s) const { return treedp::marginals(s).marginals; }

Vector TreeOracle::marg_vjp(const Vector& s, const Vector& g) const { return treedp::marginals_vjp(s, g); }

sparsemap::SparseSolution TreeOracle::project(const Vector& v) const {
  return sparsemap::solve(v, [](const Vector& s) { return treedp::map_tree(s); }, options_);
}

Vector TreeOracle::project_vjp(const sparsemap::SparseSolution& solution, const Vector& g) const {
  return sparsemap::vjp(solution, g);
}

bool TreeOracle::is_vertex(const Vector& z) const { return treedp::is_valid_tree(z); }

bool TreeOracle::is_mean_point(const Vector& mu, double tol) const { return treedp::is_tree_mean_point(mu, tol); }

}  // namespace pullback
