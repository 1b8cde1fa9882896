#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "pullback/models.hpp"
#include "pullback/oracles.hpp"
#include "pullback/rng.hpp"
#include "pullback/simplex.hpp"

using namespace pullback;
using testing::max_abs;
using testing::vec;

TEST_CASE("argmax_onehot picks the largest score, lowest index on ties") {
  CHECK(simplex::argmax_onehot(vec({0, 0, 5})) == vec({0, 0, 1}));
  CHECK(simplex::argmax_onehot(vec({2, 2, 0})) == vec({1, 0, 0}));
  CHECK(simplex::argmax_onehot(vec({-1, -3})) == vec({1, 0}));
  CHECK(simplex::is_vertex(simplex::argmax_onehot(vec({0.3, -2, 0.1, 0.3}))));
}

TEST_CASE("argmax rejects non-finite scores") {
  CHECK_THROWS_AS(simplex::argmax_onehot(vec({0, std::numeric_limits<double>::quiet_NaN()})), InvalidInput);
  CHECK_THROWS_AS(simplex::softmax(vec({std::numeric_limits<double>::infinity(), 0})), InvalidInput);
}

TEST_CASE("argmax is shift invariant") {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const Vector s = rng.normal_vector(5);
    const double c = 10.0 * rng.normal();
    CHECK(simplex::argmax_onehot(s) == simplex::argmax_onehot((s.array() + c).matrix()));
  }
}

TEST_CASE("softmax values") {
  CHECK(max_abs(simplex::softmax(vec({0, 0, 0})), vec({1.0 / 3, 1.0 / 3, 1.0 / 3})) < 1e-15);
  CHECK(max_abs(simplex::softmax(vec({1000, 0})), vec({1, 0})) < 1e-12);
  // 1/(1+e) and e/(1+e), evaluated independently at high precision
  CHECK(max_abs(simplex::softmax(vec({1, 2})), vec({0.2689414213699951, 0.7310585786300049})) < 1e-15);
}

TEST_CASE("sparsemax values") {
  CHECK(max_abs(simplex::sparsemax(vec({0.8, 0.6, 0.1})), vec({0.6, 0.4, 0})) < 1e-15);
  CHECK(simplex::sparsemax(vec({5, 0, 0})) == vec({1, 0, 0}));
  for (double c : {-3.0, 0.0, 0.7, 1e6}) CHECK(max_abs(simplex::sparsemax(vec({c, c})), vec({0.5, 0.5})) < 1e-12);
}

TEST_CASE("sparsemax returns a vertex when the top score leads by more than one") {
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    Vector s = rng.normal_vector(6);
    const Eigen::Index top = simplex::argmax_index(s);
    double second = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (i != top) second = std::max(second, s[i]);
    s[top] = second + 1.0 + 0.01 + rng.uniform();
    CHECK(simplex::is_vertex(simplex::sparsemax(s)));
  }
}

TEST_CASE("softmax and sparsemax land on the simplex; sparsemax matches the support-enumeration projection") {
  Rng rng(11);
  for (int t = 0; t < 300; ++t) {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.below(4));
    const Vector s = 3.0 * rng.normal_vector(k);
    CHECK(simplex::is_simplex_point(simplex::softmax(s)));
    const Vector p = simplex::sparsemax(s);
    CHECK(simplex::is_simplex_point(p));
    CHECK(max_abs(p, oracles::simplex_projection_by_supports(s)) < 1e-12);
  }
}

TEST_CASE("softmax_vjp") {
  CHECK(max_abs(simplex::softmax_vjp(vec({0, 0}), vec({1, 1})), vec({0, 0})) < 1e-16);
  CHECK(max_abs(simplex::softmax_vjp(vec({0, 0}), vec({1, 0})), vec({0.25, -0.25})) < 1e-16);
  CHECK(simplex::softmax_vjp(vec({0.4, -2, 3}), vec({0, 0, 0})).isZero());
  CHECK_THROWS_AS(simplex::softmax_vjp(vec({0, 0}), vec({1, 0, 0})), InvalidInput);
}

TEST_CASE("sparsemax_vjp") {
  CHECK(max_abs(simplex::sparsemax_vjp(vec({0.8, 0.6, 0.1}), vec({1, 0, 7})), vec({0.5, -0.5, 0})) < 1e-15);
  CHECK(simplex::sparsemax_vjp(vec({0.4, 0.3, 0.35}), vec({2, 2, 2})).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(simplex::sparsemax_vjp(vec({5, 0, 0}), vec({1, -2, 3})).isZero());
  CHECK_THROWS_AS(simplex::sparsemax_vjp(vec({0, 0}), vec({1})), InvalidInput);
}

TEST_CASE("vjps match central finite differences") {
  Rng rng(21);
  int checked = 0;
  for (int t = 0; t < 200 && checked < 50; ++t) {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.below(5));
    const Vector s = rng.normal_vector(k);
    const Vector g = rng.normal_vector(k);
    const auto f_soft = [&](const Vector& x) { return simplex::softmax(x).dot(g); };
    CHECK(models::finite_diff_check(f_soft, s, simplex::softmax_vjp(s, g)) < 1e-4);

    // skip points where a coordinate sits near the sparsemax threshold
    const Vector p = simplex::sparsemax(s);
    const auto support = simplex::sparsemax_support(p);
    bool stable = true;
    for (double h : {1e-5, -1e-5})
      for (Eigen::Index i = 0; i < k; ++i) {
        Vector sh = s;
        sh[i] += h;
        if (simplex::sparsemax_support(simplex::sparsemax(sh)) != support) stable = false;
      }
    if (!stable) continue;
    ++checked;
    const auto f_sparse = [&](const Vector& x) { return simplex::sparsemax(x).dot(g); };
    CHECK(models::finite_diff_check(f_sparse, s, simplex::sparsemax_vjp(s, g)) < 1e-4);
  }
  CHECK(checked >= 20);
}
