#include "pullback/sparsemap.hpp"

#include <algorithm>
#include <limits>

namespace pullback::sparsemap {

namespace {

constexpr double kJitter = 1e-10;

Matrix stack_columns(const std::vector<Vector>& support) {
  Matrix z(support.front().size(), static_cast<Eigen::Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) z.col(static_cast<Eigen::Index>(i)) = support[i];
  return z;
}

Matrix gram(const Matrix& z) {
  Matrix g = z.transpose() * z;
  Eigen::FullPivLU<Matrix> lu(g);
  if (!lu.isInvertible()) g.diagonal().array() += kJitter;
  return g;
}

// Minimiser of |Z a|^2 / 2 - s^T Z a subject to 1^T a = 1 (signs unconstrained).
Vector restricted_solve(const Matrix& z, const Vector& s) {
  const Eigen::Index n = z.cols();
  Matrix kkt = Matrix::Zero(n + 1, n + 1);
  kkt.topLeftCorner(n, n) = gram(z);
  kkt.block(0, n, n, 1).setOnes();
  kkt.block(n, 0, 1, n).setOnes();
  Vector rhs(n + 1);
  rhs.head(n) = z.transpose() * s;
  rhs[n] = 1.0;
  const Vector sol = kkt.fullPivLu().solve(rhs);
  return sol.head(n);
}

}  // namespace

double objective(const Vector& s, const Vector& mu) { return s.dot(mu) - 0.5 * mu.squaredNorm(); }

SparseSolution solve(const Vector& s, const MapOracle& map_oracle, const Options& options) {
  require_finite(s, "sparsemap_solve");
  SparseSolution sol;
  sol.support.push_back(map_oracle(s));
  sol.weights = Vector::Ones(1);
  sol.mean = sol.support.front();
  sol.objective_trace.push_back(objective(s, sol.mean));

  for (int iter = 0; iter < options.max_iter; ++iter) {
    const Vector residual = s - sol.mean;
    const Vector candidate = map_oracle(residual);
    sol.gap = residual.dot(candidate - sol.mean);
    if (sol.gap <= options.tol) {
      sol.converged = true;
      break;
    }
    const bool known = std::any_of(sol.support.begin(), sol.support.end(),
                                   [&](const Vector& v) { return v == candidate; });
    if (known) {
      // restricted problem is already optimal on this face; the remaining gap is round-off
      sol.converged = sol.gap <= std::max(options.tol, 1e-8 * (1.0 + s.squaredNorm()));
      break;
    }
    ++sol.iterations;
    sol.support.push_back(candidate);
    Vector alpha(sol.weights.size() + 1);
    alpha << sol.weights, 0.0;

    // active-set inner loop: move toward the restricted optimum, dropping
    // vertices whose weight would go negative
    while (true) {
      const Matrix z = stack_columns(sol.support);
      const Vector beta = restricted_solve(z, s);
      if ((beta.array() >= 0.0).all()) {
        alpha = beta;
        break;
      }
      double step = 1.0;
      for (Eigen::Index i = 0; i < beta.size(); ++i) {
        if (beta[i] < 0.0) step = std::min(step, alpha[i] / (alpha[i] - beta[i]));
      }
      alpha += step * (beta - alpha);
      std::vector<Vector> kept;
      std::vector<double> kept_w;
      for (Eigen::Index i = 0; i < alpha.size(); ++i) {
        if (alpha[i] > 1e-14) {
          kept.push_back(sol.support[static_cast<std::size_t>(i)]);
          kept_w.push_back(alpha[i]);
        }
      }
      sol.support = std::move(kept);
      alpha = Eigen::Map<Vector>(kept_w.data(), static_cast<Eigen::Index>(kept_w.size()));
    }

    // drop exact zeros left by the solve and renormalise against round-off
    std::vector<Vector> kept;
    std::vector<double> kept_w;
    for (Eigen::Index i = 0; i < alpha.size(); ++i) {
      if (alpha[i] > 0.0) {
        kept.push_back(sol.support[static_cast<std::size_t>(i)]);
        kept_w.push_back(alpha[i]);
      }
    }
    sol.support = std::move(kept);
    sol.weights = Eigen::Map<Vector>(kept_w.data(), static_cast<Eigen::Index>(kept_w.size()));
    sol.weights /= sol.weights.sum();
    sol.mean = stack_columns(sol.support) * sol.weights;
    sol.objective_trace.push_back(objective(s, sol.mean));
  }
  if (!sol.converged && options.max_iter == 0) {
    const Vector residual = s - sol.mean;
    sol.gap = residual.dot(map_oracle(residual) - sol.mean);
    sol.converged = sol.gap <= options.tol;
  }
  return sol;
}

Vector vjp(const SparseSolution& solution, const Vector& g) {
  if (!solution.converged) throw InvalidInput("sparsemap_vjp: solution did not converge");
  require_same_length(solution.mean, g, "sparsemap_vjp");
  const Matrix z = stack_columns(solution.support);
  const Matrix inv = gram(z).inverse();
  const Vector ones = Vector::Ones(z.cols());
  const Vector inv_ones = inv * ones;
  const Matrix face = inv - inv_ones * inv_ones.transpose() / ones.dot(inv_ones);
  return z * (face * (z.transpose() * g));
}

}  // namespace pullback::sparsemap
