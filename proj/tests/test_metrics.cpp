#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pullback/metrics.hpp"
#include "pullback/rng.hpp"
#include "pullback/treedp.hpp"

using namespace pullback;
using namespace pullback::metrics;

TEST_CASE("accuracy") {
  CHECK(accuracy({1, -1, 1}, {1, -1, 1}) == 1.0);
  CHECK(accuracy({1, -1, 1, -1}, {-1, 1, -1, 1}) == 0.0);
  CHECK(accuracy({1, 1, -1, -1}, {1, -1, -1, 1}) == 0.5);
  CHECK_THROWS_AS(accuracy({1}, {1, 1}), InvalidInput);
  // a constant predictor scores the frequency of that class
  CHECK(accuracy({1, 1, 1, 1, 1}, {1, -1, 1, 1, -1}) == 0.6);
}

TEST_CASE("v-measure basics") {
  const std::vector<int> truth{0, 0, 1, 1, 2, 2};
  CHECK(v_measure(truth, truth).v_measure == 1.0);
  CHECK(v_measure({5, 5, 3, 3, 9, 9}, truth).v_measure == 1.0);

  const auto one = v_measure({0, 0, 0, 0}, {0, 0, 1, 1});
  CHECK(one.homogeneity == 0.0);
  CHECK(one.v_measure == 0.0);
  CHECK(one.completeness == 1.0);

  CHECK_THROWS_AS(v_measure({}, {}), InvalidInput);
  CHECK_THROWS_AS(v_measure({1, 2}, {1}), InvalidInput);
}

TEST_CASE("v-measure on a hand-computed case") {
  // pred {0,0,1,1}, truth {0,0,0,1}:
  //   H(C) = H(3/4, 1/4), H(C|K) = (1/2) H(1/2, 1/2) = ln2/2
  //   H(K) = ln 2, H(K|C) = (3/4) H(2/3, 1/3)
  const double h_c = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
  const double h_c_given_k = 0.5 * std::log(2.0);
  const double h_k = std::log(2.0);
  const double h_k_given_c = 0.75 * -(2.0 / 3 * std::log(2.0 / 3) + 1.0 / 3 * std::log(1.0 / 3));
  const double h = 1 - h_c_given_k / h_c;
  const double c = 1 - h_k_given_c / h_k;
  const auto got = v_measure({0, 0, 1, 1}, {0, 0, 0, 1});
  CHECK(std::abs(got.homogeneity - h) < 1e-12);
  CHECK(std::abs(got.completeness - c) < 1e-12);
  CHECK(std::abs(got.v_measure - 2 * h * c / (h + c)) < 1e-12);
}

TEST_CASE("v-measure is invariant to relabeling and symmetric") {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 20 + rng.below(200);
    std::vector<int> pred(n), truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng.below(4));
      pred[i] = rng.uniform() < 0.5 ? truth[i] : static_cast<int>(rng.below(5));
    }
    std::vector<int> perm(5);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = 4; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[rng.below(static_cast<std::size_t>(i + 1))]);
    std::vector<int> relabeled(n);
    for (std::size_t i = 0; i < n; ++i) relabeled[i] = perm[static_cast<std::size_t>(pred[i])] * 3 - 11;
    const auto a = v_measure(pred, truth);
    CHECK(v_measure(relabeled, truth).v_measure == a.v_measure);
    CHECK(std::abs(v_measure(truth, pred).v_measure - a.v_measure) < 1e-12);
    CHECK(a.v_measure >= 0.0);
    CHECK(a.v_measure <= 1.0);
  }
}

TEST_CASE("unlabeled attachment score") {
  const treedp::Heads a{-1, 0, 1}, b{-1, 2, 0};
  CHECK(uas({a}, {a}) == 1.0);
  CHECK(uas({a}, {b}) == 0.0);
  CHECK(uas({a, b}, {a, a}) == 0.5);
  CHECK_THROWS_AS(uas({a}, {treedp::Heads{-1, 0, 1, 2}}), InvalidInput);

  // a random guess on L=2 is right half the time
  Rng rng(2);
  std::vector<treedp::Heads> pred, gold;
  for (int i = 0; i < 20000; ++i) {
    pred.push_back(rng.uniform() < 0.5 ? a : b);
    gold.push_back(rng.uniform() < 0.5 ? a : b);
  }
  CHECK(std::abs(uas(pred, gold) - 0.5) < 0.02);
}
