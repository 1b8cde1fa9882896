#include "pullback/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace pullback::simplex {

namespace {

void require_scores(const Vector& s, const char* what) {
  if (s.size() < 1) throw InvalidInput(std::string(what) + ": empty score vector");
  require_finite(s, what);
}

}  // namespace

Eigen::Index argmax_index(const Vector& s) {
  require_scores(s, "argmax_onehot");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < s.size(); ++i)
    if (s[i] > s[best]) best = i;
  return best;
}

Vector argmax_onehot(const Vector& s) {
  Vector z = Vector::Zero(s.size());
  z[argmax_index(s)] = 1.0;
  return z;
}

Vector softmax(const Vector& s) {
  require_scores(s, "softmax");
  Vector p = (s.array() - s.maxCoeff()).exp();
  return p / p.sum();
}

Vector sparsemax(const Vector& s) {
  require_scores(s, "sparsemax");
  const Eigen::Index n = s.size();
  std::vector<double> sorted(s.data(), s.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  // largest k with 1 + k * u_k > sum_{j<=k} u_j
  double cumsum = 0.0;
  double tau_sum = sorted[0];
  Eigen::Index support = 1;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumsum += sorted[k];
    if (1.0 + static_cast<double>(k + 1) * sorted[k] > cumsum) {
      support = k + 1;
      tau_sum = cumsum;
    }
  }
  const double tau = (tau_sum - 1.0) / static_cast<double>(support);
  return (s.array() - tau).max(0.0).matrix();
}

Vector softmax_vjp(const Vector& s, const Vector& g) {
  require_same_length(s, g, "softmax_vjp");
  const Vector p = softmax(s);
  return (p.array() * (g.array() - p.dot(g))).matrix();
}

std::vector<Eigen::Index> sparsemax_support(const Vector& p) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) support.push_back(i);
  return support;
}

Vector sparsemax_vjp(const Vector& s, const Vector& g) {
  require_same_length(s, g, "sparsemax_vjp");
  const auto support = sparsemax_support(sparsemax(s));
  Vector out = Vector::Zero(s.size());
  double mean = 0.0;
  for (auto i : support) mean += g[i];
  mean /= static_cast<double>(support.size());
  for (auto i : support) out[i] = g[i] - mean;
  return out;
}

bool is_simplex_point(const Vector& p, double tol) {
  if (p.size() == 0 || !p.allFinite()) return false;
  if ((p.array() < 0.0).any()) return false;
  return std::abs(p.sum() - 1.0) <= tol;
}

bool is_vertex(const Vector& z) {
  int ones = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z[i] == 1.0) {
      ++ones;
    } else if (z[i] != 0.0) {
      return false;
    }
  }
  return ones == 1;
}

}  // namespace pullback::simplex
