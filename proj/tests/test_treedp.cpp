#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "helpers.hpp"
#include "pullback/models.hpp"
#include "pullback/oracles.hpp"
#include "pullback/treedp.hpp"

using namespace pullback;
using namespace pullback::treedp;
using testing::max_abs;

namespace {

// Brute force: every head assignment, filtered by a projectivity test written
// directly from the definition (no two arcs cross when drawn above the line).
bool crosses(int a, int b, int c, int d) { return (a < c && c < b && b < d) || (c < a && a < d && d < b); }

int count_trees_brute_force(int length) {
  std::vector<int> heads(static_cast<std::size_t>(length + 1), 0);
  int count = 0;
  const auto valid = [&] {
    int roots = 0;
    for (int m = 1; m <= length; ++m) {
      if (heads[static_cast<std::size_t>(m)] == m) return false;
      roots += heads[static_cast<std::size_t>(m)] == 0;
    }
    if (roots != 1) return false;
    for (int m = 1; m <= length; ++m) {
      int x = m;
      for (int steps = 0; x != 0; ++steps) {
        if (steps > length) return false;
        x = heads[static_cast<std::size_t>(x)];
      }
    }
    for (int m = 1; m <= length; ++m)
      for (int n = m + 1; n <= length; ++n) {
        const int hm = heads[static_cast<std::size_t>(m)], hn = heads[static_cast<std::size_t>(n)];
        if (crosses(std::min(hm, m), std::max(hm, m), std::min(hn, n), std::max(hn, n))) return false;
      }
    return true;
  };
  std::function<void(int)> rec = [&](int m) {
    if (m > length) {
      count += valid();
      return;
    }
    for (int h = 0; h <= length; ++h) {
      heads[static_cast<std::size_t>(m)] = h;
      rec(m + 1);
    }
  };
  rec(1);
  return count;
}

Vector arc_scores(int length, std::initializer_list<std::tuple<int, int, double>> arcs) {
  const ArcIndex index(length);
  Vector s = Vector::Zero(index.size());
  for (const auto& [h, m, v] : arcs) s[index.index(h, m)] = v;
  return s;
}

}  // namespace

TEST_CASE("ArcIndex is a bijection onto 0..L*L-1") {
  for (int length = 1; length <= 8; ++length) {
    const ArcIndex index(length);
    std::set<Eigen::Index> seen;
    for (int m = 1; m <= length; ++m)
      for (int h = 0; h <= length; ++h) {
        if (h == m) continue;
        const auto i = index.index(h, m);
        CHECK(i >= 0);
        CHECK(i < index.size());
        CHECK(index.head(i) == h);
        CHECK(index.modifier(i) == m);
        seen.insert(i);
      }
    CHECK(static_cast<Eigen::Index>(seen.size()) == index.size());
  }
  CHECK_THROWS(ArcIndex(2).index(1, 1));
  CHECK_THROWS(ArcIndex(2).index(0, 3));
  CHECK(ArcIndex::length_for_size(36) == 6);
  CHECK_THROWS_AS(ArcIndex::length_for_size(5), InvalidInput);
}

TEST_CASE("enumerate_trees small cases") {
  const auto one = enumerate_trees(1);
  REQUIRE(one.size() == 1);
  CHECK(heads_from_tree(one[0]) == Heads{-1, 0});

  const auto two = enumerate_trees(2);
  REQUIRE(two.size() == 2);
  std::set<Heads> got;
  for (const auto& z : two) got.insert(heads_from_tree(z));
  CHECK(got == std::set<Heads>{{-1, 0, 1}, {-1, 2, 0}});
}

TEST_CASE("enumerate_trees counts agree with an independent brute force") {
  // frozen counts of single-root projective trees, from a separate enumeration
  const int expected[] = {0, 1, 2, 7, 30, 143, 728, 3876};
  for (int length = 1; length <= 5; ++length) {
    CHECK(count_trees_brute_force(length) == expected[length]);
  }
  for (int length = 1; length <= 7; ++length) {
    const auto trees = enumerate_trees(length);
    CHECK(static_cast<int>(trees.size()) == expected[length]);
    std::set<Heads> distinct;
    for (const auto& z : trees) {
      CHECK(is_valid_tree(z));
      distinct.insert(heads_from_tree(z));
    }
    CHECK(distinct.size() == trees.size());
  }
  CHECK_THROWS_AS(enumerate_trees(8), Unsupported);
  CHECK_THROWS_AS(enumerate_trees(0), Unsupported);
}

TEST_CASE("validator rejects malformed trees") {
  CHECK(is_valid_heads({-1, 0, 1, 2}));
  CHECK_FALSE(is_valid_heads({-1, 0, 0}));        // two root children
  CHECK_FALSE(is_valid_heads({-1, 2, 1}));        // cycle, no root child
  CHECK_FALSE(is_valid_heads({-1, 0, 4, 1, 1}));  // arc 4->2 crosses 1->3
  CHECK_FALSE(is_valid_heads({-1, 1}));           // self loop
}

TEST_CASE("map_tree on L=2") {
  const Vector s = arc_scores(2, {{0, 1, 1.0}, {1, 2, 1.0}});
  CHECK(heads_from_tree(map_tree(s)) == Heads{-1, 0, 1});

  const Vector flat = Vector::Zero(4);
  const Vector z = map_tree(flat);
  CHECK(is_valid_tree(z));
  // documented tie-break: leftmost root child
  CHECK(heads_from_tree(z) == Heads{-1, 0, 1});
}

TEST_CASE("map_tree matches the enumeration maximum") {
  Rng rng(5);
  for (int length = 1; length <= 6; ++length) {
    const auto trees = enumerate_trees(length);
    for (int t = 0; t < 50; ++t) {
      const Vector s = rng.normal_vector(static_cast<Eigen::Index>(length) * length);
      const Vector z = map_tree(s);
      CHECK(is_valid_tree(z));
      CHECK(s.dot(z) == oracles::best_vertex_score(s, trees));
    }
  }
}

TEST_CASE("map_tree is unchanged by a per-modifier shift") {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const int length = 2 + static_cast<int>(rng.below(5));
    const ArcIndex index(length);
    Vector s = rng.normal_vector(index.size());
    const Vector before = map_tree(s);
    const int m = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(length)));
    const double c = 5.0 * rng.normal();
    for (int h = 0; h <= length; ++h)
      if (h != m) s[index.index(h, m)] += c;
    CHECK(map_tree(s) == before);
  }
}

TEST_CASE("marginals") {
  const auto m = marginals(Vector::Zero(4));
  const ArcIndex index(2);
  CHECK(std::abs(m.marginals[index.index(0, 1)] - 0.5) < 1e-15);
  CHECK(std::abs(m.marginals[index.index(0, 2)] - 0.5) < 1e-15);
  CHECK(std::abs(m.marginals[index.index(1, 2)] - 0.5) < 1e-15);
  CHECK(std::abs(m.marginals[index.index(2, 1)] - 0.5) < 1e-15);
  CHECK(std::abs(m.log_partition - std::log(2.0)) < 1e-15);

  Rng rng(9);
  for (int length = 1; length <= 6; ++length) {
    const auto trees = enumerate_trees(length);
    for (int t = 0; t < 30; ++t) {
      const Vector s = 2.0 * rng.normal_vector(static_cast<Eigen::Index>(length) * length);
      const auto got = marginals(s);
      CHECK(max_abs(got.marginals, oracles::gibbs_expectation(s, trees)) < 1e-6);
      CHECK(is_tree_mean_point(got.marginals));
      CHECK(got.log_partition >= s.dot(map_tree(s)));
      if (length <= 4) CHECK(oracles::hull_membership_residual(got.marginals, trees) < 1e-8);
    }
  }
}

TEST_CASE("marginals saturate on a dominant arc") {
  const ArcIndex index(4);
  Vector s = Vector::Zero(index.size());
  s[index.index(2, 3)] = 50.0;
  CHECK(marginals(s).marginals[index.index(2, 3)] >= 1.0 - 1e-9);
}

TEST_CASE("marginals reject non-finite scores") {
  Vector s = Vector::Zero(9);
  s[3] = std::nan("");
  CHECK_THROWS_AS(marginals(s), InvalidInput);
  CHECK_THROWS_AS(map_tree(s), InvalidInput);
}

TEST_CASE("marginals_vjp") {
  Rng rng(10);
  const Vector s = rng.normal_vector(9);
  CHECK(marginals_vjp(s, Vector::Zero(9)).isZero());
  CHECK(marginals_vjp(s, Vector::Constant(9, 2.5)).cwiseAbs().maxCoeff() < 1e-12);
  for (int t = 0; t < 20; ++t) {
    const Vector x = rng.normal_vector(9);
    const Vector g = rng.normal_vector(9);
    const auto f = [&](const Vector& v) { return marginals(v).marginals.dot(g); };
    CHECK(max_abs(models::finite_diff_gradient(f, x), marginals_vjp(x, g)) < 1e-5);
  }
  CHECK_THROWS_AS(marginals_vjp(Vector::Zero(81), Vector::Zero(81)), Unsupported);
}

TEST_CASE("perturb-and-map sampling") {
  SUBCASE("saturated scores return the boosted tree") {
    const auto trees = enumerate_trees(3);
    const Vector target = trees[4];
    const Vector s = 100.0 * target;
    Rng rng(1);
    int hits = 0;
    for (int t = 0; t < 10000; ++t) hits += sample_perturb_map(s, rng) == target;
    CHECK(hits >= 9990);
  }
  SUBCASE("flat scores on L=2 split evenly") {
    Rng rng(2);
    int first = 0;
    const Heads left{-1, 0, 1};
    for (int t = 0; t < 10000; ++t) first += heads_from_tree(sample_perturb_map(Vector::Zero(4), rng)) == left;
    CHECK(std::abs(first / 10000.0 - 0.5) < 0.02);
  }
  SUBCASE("fixed seed repeats the sequence") {
    Rng a(77), b(77);
    const Vector s = Rng(3).normal_vector(16);
    for (int t = 0; t < 100; ++t) CHECK(sample_perturb_map(s, a) == sample_perturb_map(s, b));
  }
}

TEST_CASE("exact sampler matches marginals") {
  Rng rng(12);
  const Vector s = rng.normal_vector(9);
  Vector freq = Vector::Zero(9);
  constexpr int kDraws = 20000;
  for (int t = 0; t < kDraws; ++t) freq += sample_exact(s, rng);
  freq /= kDraws;
  CHECK(max_abs(freq, marginals(s).marginals) < 0.02);
}
