#include "pullback/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pullback::oracles {

Vector simplex_projection_by_supports(const Vector& v) {
  const Eigen::Index k = v.size();
  if (k == 0) throw InvalidInput("simplex_projection_by_supports: empty input");
  if (k > 16) throw InvalidInput("simplex_projection_by_supports: at most 16 coordinates");
  require_finite(v, "simplex_projection_by_supports");

  Vector best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    // On support S the projection is v_S - tau with tau fixed by sum = 1.
    double sum = 0.0;
    int size = 0;
    for (Eigen::Index i = 0; i < k; ++i)
      if (mask & (1u << i)) {
        sum += v[i];
        ++size;
      }
    const double tau = (sum - 1.0) / size;
    Vector p = Vector::Zero(k);
    bool feasible = true;
    for (Eigen::Index i = 0; i < k; ++i)
      if (mask & (1u << i)) {
        p[i] = v[i] - tau;
        if (p[i] < 0.0) feasible = false;
      }
    if (!feasible) continue;
    const double dist = (p - v).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = p;
    }
  }
  return best;
}

double best_vertex_score(const Vector& s, const std::vector<Vector>& vertices) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& z : vertices) best = std::max(best, s.dot(z));
  return best;
}

double log_partition(const Vector& s, const std::vector<Vector>& vertices) {
  const double top = best_vertex_score(s, vertices);
  double total = 0.0;
  for (const auto& z : vertices) total += std::exp(s.dot(z) - top);
  return top + std::log(total);
}

Vector gibbs_expectation(const Vector& s, const std::vector<Vector>& vertices) {
  const double log_z = log_partition(s, vertices);
  Vector mean = Vector::Zero(s.size());
  for (const auto& z : vertices) mean += std::exp(s.dot(z) - log_z) * z;
  return mean;
}

NearestPoint nearest_point_in_hull(const Vector& s, const std::vector<Vector>& vertices, int max_iter) {
  if (vertices.empty()) throw InvalidInput("nearest_point_in_hull: no vertices");
  const auto n = static_cast<Eigen::Index>(vertices.size());
  const Eigen::Index dim = s.size();

  Matrix p(dim, n);
  double scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    p.col(i) = vertices[static_cast<std::size_t>(i)] - s;
    scale = std::max(scale, p.col(i).squaredNorm());
  }
  const double eps = 1e-14 * std::max(scale, 1.0);

  Eigen::Index start = 0;
  p.colwise().squaredNorm().minCoeff(&start);
  std::vector<Eigen::Index> set{start};
  std::vector<double> lambda{1.0};
  Vector x = p.col(start);

  NearestPoint out;
  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    Eigen::Index j = 0;
    (x.transpose() * p).minCoeff(&j);
    if (x.squaredNorm() - x.dot(p.col(j)) <= eps ||
        std::find(set.begin(), set.end(), j) != set.end()) {
      out.converged = true;
      break;
    }
    set.push_back(j);
    lambda.push_back(0.0);

    while (true) {
      // affine minimiser over the current set: [P^T P, 1; 1^T, 0] [a; t] = [0; 1]
      const auto m = static_cast<Eigen::Index>(set.size());
      Matrix kkt = Matrix::Zero(m + 1, m + 1);
      for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < m; ++b)
          kkt(a, b) = p.col(set[static_cast<std::size_t>(a)]).dot(p.col(set[static_cast<std::size_t>(b)]));
        kkt(a, m) = 1.0;
        kkt(m, a) = 1.0;
      }
      Vector rhs = Vector::Zero(m + 1);
      rhs[m] = 1.0;
      const Vector alpha = kkt.completeOrthogonalDecomposition().solve(rhs).head(m);

      if (alpha.minCoeff() > 1e-15) {
        for (Eigen::Index a = 0; a < m; ++a) lambda[static_cast<std::size_t>(a)] = alpha[a];
        break;
      }
      double theta = 1.0;
      for (Eigen::Index a = 0; a < m; ++a) {
        const double l = lambda[static_cast<std::size_t>(a)];
        if (alpha[a] <= 1e-15 && l - alpha[a] > 0.0) theta = std::min(theta, l / (l - alpha[a]));
      }
      for (Eigen::Index a = 0; a < m; ++a) {
        auto& l = lambda[static_cast<std::size_t>(a)];
        l += theta * (alpha[a] - l);
      }
      std::vector<Eigen::Index> kept_set;
      std::vector<double> kept_lambda;
      for (std::size_t a = 0; a < set.size(); ++a)
        if (lambda[a] > 1e-15) {
          kept_set.push_back(set[a]);
          kept_lambda.push_back(lambda[a]);
        }
      set = std::move(kept_set);
      lambda = std::move(kept_lambda);
      if (set.size() <= 1) {
        if (set.size() == 1) lambda = {1.0};
        break;
      }
    }
    double total = 0.0;
    for (double l : lambda) total += l;
    x = Vector::Zero(dim);
    for (std::size_t a = 0; a < set.size(); ++a) {
      lambda[a] /= total;
      x += lambda[a] * p.col(set[a]);
    }
  }

  out.weights = Vector::Zero(n);
  for (std::size_t a = 0; a < set.size(); ++a) out.weights[set[a]] = lambda[a];
  out.point = x + s;
  return out;
}

double projection_gap(const Vector& s, const Vector& mu, const std::vector<Vector>& vertices) {
  const Vector r = s - mu;
  double gap = -std::numeric_limits<double>::infinity();
  for (const auto& z : vertices) gap = std::max(gap, r.dot(z - mu));
  return gap;
}

double hull_membership_residual(const Vector& mu, const std::vector<Vector>& vertices) {
  return (nearest_point_in_hull(mu, vertices).point - mu).norm();
}

}  // namespace pullback::oracles
