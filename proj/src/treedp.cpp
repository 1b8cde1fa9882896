#include "pullback/treedp.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <mutex>
#include <optional>
#include <utility>

namespace pullback::treedp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// (L+2) x (L+2) chart addressed by token positions 1..L.
class Chart {
 public:
  explicit Chart(int length, double fill = 0.0)
      : dim_(length + 2), cells_(static_cast<std::size_t>(dim_ * dim_), fill) {}
  double& operator()(int i, int j) { return cells_[static_cast<std::size_t>(i * dim_ + j)]; }
  double operator()(int i, int j) const { return cells_[static_cast<std::size_t>(i * dim_ + j)]; }

 private:
  int dim_;
  std::vector<double> cells_;
};

class IntChart {
 public:
  explicit IntChart(int length)
      : dim_(length + 2), cells_(static_cast<std::size_t>(dim_ * dim_), -1) {}
  int& operator()(int i, int j) { return cells_[static_cast<std::size_t>(i * dim_ + j)]; }
  int operator()(int i, int j) const { return cells_[static_cast<std::size_t>(i * dim_ + j)]; }

 private:
  int dim_;
  std::vector<int> cells_;
};

int checked_length(const Vector& scores, const char* what) {
  const int length = ArcIndex::length_for_size(scores.size());
  require_finite(scores, what);
  return length;
}

// Back-pointers of the Eisner max chart.
struct EisnerBackpointers {
  IntChart incomplete;     // shared split for both arc directions
  IntChart complete_right; // head at i, spanning i..j
  IntChart complete_left;  // head at j, spanning i..j
  explicit EisnerBackpointers(int n) : incomplete(n), complete_right(n), complete_left(n) {}
};

void backtrack_complete_right(const EisnerBackpointers& bp, int i, int j, Heads& heads);
void backtrack_complete_left(const EisnerBackpointers& bp, int i, int j, Heads& heads);

void backtrack_incomplete(const EisnerBackpointers& bp, int i, int j, bool right, Heads& heads) {
  if (right) {
    heads[j] = i;
  } else {
    heads[i] = j;
  }
  const int k = bp.incomplete(i, j);
  backtrack_complete_right(bp, i, k, heads);
  backtrack_complete_left(bp, k + 1, j, heads);
}

void backtrack_complete_right(const EisnerBackpointers& bp, int i, int j, Heads& heads) {
  if (i == j) return;
  const int k = bp.complete_right(i, j);
  backtrack_incomplete(bp, i, k, true, heads);
  backtrack_complete_right(bp, k, j, heads);
}

void backtrack_complete_left(const EisnerBackpointers& bp, int i, int j, Heads& heads) {
  if (i == j) return;
  const int k = bp.complete_left(i, j);
  backtrack_complete_left(bp, i, k, heads);
  backtrack_incomplete(bp, k, j, false, heads);
}

// Exhaustive generation following the same span grammar as the DP, so each
// tree has exactly one derivation.
class TreeGenerator {
 public:
  using Arcs = std::vector<std::pair<int, int>>;
  using ArcSets = std::vector<Arcs>;

  explicit TreeGenerator(int n) : n_(n), memo_(4 * static_cast<std::size_t>((n + 2) * (n + 2))) {}

  std::vector<Heads> all() {
    std::vector<Heads> out;
    for (int r = 1; r <= n_; ++r) {
      for (const auto& left : complete(kCompleteLeft, 1, r)) {
        for (const auto& right : complete(kCompleteRight, r, n_)) {
          Heads heads(static_cast<std::size_t>(n_ + 1), -1);
          heads[static_cast<std::size_t>(r)] = 0;
          for (auto [h, m] : left) heads[static_cast<std::size_t>(m)] = h;
          for (auto [h, m] : right) heads[static_cast<std::size_t>(m)] = h;
          out.push_back(std::move(heads));
        }
      }
    }
    return out;
  }

 private:
  enum Kind { kCompleteRight = 0, kCompleteLeft = 1, kIncompleteRight = 2, kIncompleteLeft = 3 };

  static ArcSets product(const ArcSets& a, const ArcSets& b, std::optional<std::pair<int, int>> arc) {
    ArcSets out;
    out.reserve(a.size() * b.size());
    for (const auto& x : a) {
      for (const auto& y : b) {
        Arcs arcs = x;
        arcs.insert(arcs.end(), y.begin(), y.end());
        if (arc) arcs.push_back(*arc);
        out.push_back(std::move(arcs));
      }
    }
    return out;
  }

  const ArcSets& complete(Kind kind, int i, int j) {
    auto& slot = memo_[slot_index(kind, i, j)];
    if (slot) return *slot;
    ArcSets out;
    if (i == j) {
      out.emplace_back();
    } else if (kind == kCompleteRight) {
      for (int k = i + 1; k <= j; ++k) {
        auto part = product(complete(kIncompleteRight, i, k), complete(kCompleteRight, k, j), std::nullopt);
        out.insert(out.end(), part.begin(), part.end());
      }
    } else if (kind == kCompleteLeft) {
      for (int k = i; k < j; ++k) {
        auto part = product(complete(kCompleteLeft, i, k), complete(kIncompleteLeft, k, j), std::nullopt);
        out.insert(out.end(), part.begin(), part.end());
      }
    } else {
      const auto arc = kind == kIncompleteRight ? std::make_pair(i, j) : std::make_pair(j, i);
      for (int k = i; k < j; ++k) {
        auto part = product(complete(kCompleteRight, i, k), complete(kCompleteLeft, k + 1, j), arc);
        out.insert(out.end(), part.begin(), part.end());
      }
    }
    slot = std::move(out);
    return *slot;
  }

  std::size_t slot_index(Kind kind, int i, int j) const {
    const auto dim = static_cast<std::size_t>(n_ + 2);
    return (static_cast<std::size_t>(kind) * dim + static_cast<std::size_t>(i)) * dim +
           static_cast<std::size_t>(j);
  }

  int n_;
  std::vector<std::optional<ArcSets>> memo_;
};

double tree_score(const ArcIndex& index, const Vector& scores, const Heads& heads) {
  double total = 0.0;
  for (int m = 1; m <= index.length(); ++m) total += scores[index.index(heads[static_cast<std::size_t>(m)], m)];
  return total;
}

}  // namespace

ArcIndex::ArcIndex(int length) : length_(length) {
  if (length < 1) throw InvalidInput("ArcIndex: length must be >= 1");
}

Eigen::Index ArcIndex::index(int head, int modifier) const {
  if (modifier < 1 || modifier > length_ || head < 0 || head > length_ || head == modifier) {
    throw InvalidInput("ArcIndex: invalid arc " + std::to_string(head) + "->" + std::to_string(modifier));
  }
  const int offset = head < modifier ? head : head - 1;
  return static_cast<Eigen::Index>(modifier - 1) * length_ + offset;
}

int ArcIndex::modifier(Eigen::Index arc) const { return static_cast<int>(arc / length_) + 1; }

int ArcIndex::head(Eigen::Index arc) const {
  const int m = modifier(arc);
  const int offset = static_cast<int>(arc % length_);
  return offset < m ? offset : offset + 1;
}

int ArcIndex::length_for_size(Eigen::Index size) {
  const auto root = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(size))));
  if (size < 1 || root * root != size) {
    throw InvalidInput("arc vector size " + std::to_string(size) + " is not L*L for any L >= 1");
  }
  return static_cast<int>(root);
}

Vector tree_from_heads(const Heads& heads) {
  const int n = static_cast<int>(heads.size()) - 1;
  const ArcIndex index(n);
  Vector tree = Vector::Zero(index.size());
  for (int m = 1; m <= n; ++m) tree[index.index(heads[static_cast<std::size_t>(m)], m)] = 1.0;
  return tree;
}

Heads heads_from_tree(const Vector& tree) {
  const int n = ArcIndex::length_for_size(tree.size());
  const ArcIndex index(n);
  Heads heads(static_cast<std::size_t>(n + 1), -1);
  for (Eigen::Index a = 0; a < tree.size(); ++a) {
    if (tree[a] == 1.0) {
      auto& h = heads[static_cast<std::size_t>(index.modifier(a))];
      if (h != -1) throw InvalidInput("heads_from_tree: modifier with two heads");
      h = index.head(a);
    } else if (tree[a] != 0.0) {
      throw InvalidInput("heads_from_tree: entries must be 0 or 1");
    }
  }
  for (int m = 1; m <= n; ++m)
    if (heads[static_cast<std::size_t>(m)] == -1) throw InvalidInput("heads_from_tree: modifier without head");
  return heads;
}

bool is_valid_heads(const Heads& heads) {
  const int n = static_cast<int>(heads.size()) - 1;
  if (n < 1) return false;
  auto head_of = [&](int m) { return heads[static_cast<std::size_t>(m)]; };
  int root_children = 0;
  for (int m = 1; m <= n; ++m) {
    const int h = head_of(m);
    if (h < 0 || h > n || h == m) return false;
    if (h == 0) ++root_children;
  }
  if (root_children != 1) return false;
  // acyclic: every token reaches the root within n steps
  for (int m = 1; m <= n; ++m) {
    int cur = m;
    int steps = 0;
    while (cur != 0 && steps <= n) {
      cur = head_of(cur);
      ++steps;
    }
    if (cur != 0) return false;
  }
  auto dominates = [&](int h, int k) {
    for (int cur = k; cur != 0; cur = head_of(cur))
      if (cur == h) return true;
    return h == 0;
  };
  // projective: tokens strictly inside an arc descend from its head
  for (int m = 1; m <= n; ++m) {
    const int h = head_of(m);
    for (int k = std::min(h, m) + 1; k < std::max(h, m); ++k)
      if (!dominates(h, k)) return false;
  }
  return true;
}

bool is_valid_tree(const Vector& tree) {
  try {
    return is_valid_heads(heads_from_tree(tree));
  } catch (const InvalidInput&) {
    return false;
  }
}

bool is_tree_mean_point(const Vector& marginals, double tol) {
  int n = 0;
  try {
    n = ArcIndex::length_for_size(marginals.size());
  } catch (const InvalidInput&) {
    return false;
  }
  if (!marginals.allFinite()) return false;
  if ((marginals.array() < -tol).any() || (marginals.array() > 1.0 + tol).any()) return false;
  const ArcIndex index(n);
  double root_mass = 0.0;
  for (int m = 1; m <= n; ++m) {
    double incoming = 0.0;
    for (int h = 0; h <= n; ++h)
      if (h != m) incoming += marginals[index.index(h, m)];
    if (std::abs(incoming - 1.0) > tol) return false;
    root_mass += marginals[index.index(0, m)];
  }
  return std::abs(root_mass - 1.0) <= tol;
}

const std::vector<Heads>& enumerate_heads(int length) {
  if (length < 1 || length > kMaxExactLength) {
    throw Unsupported("tree enumeration limited to 1 <= L <= " + std::to_string(kMaxExactLength) +
                      ", got " + std::to_string(length));
  }
  static std::mutex mutex;
  static std::array<std::optional<std::vector<Heads>>, kMaxExactLength + 1> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[static_cast<std::size_t>(length)];
  if (!slot) slot = TreeGenerator(length).all();
  return *slot;
}

std::vector<Vector> enumerate_trees(int length) {
  if (length < 1 || length > kMaxEnumerateLength) {
    throw Unsupported("enumerate_trees: L must be in [1, " + std::to_string(kMaxEnumerateLength) +
                      "], got " + std::to_string(length));
  }
  std::vector<Vector> trees;
  for (const auto& heads : enumerate_heads(length)) trees.push_back(tree_from_heads(heads));
  return trees;
}

Heads map_heads(const Vector& scores) {
  const int n = checked_length(scores, "map_tree");
  const ArcIndex index(n);
  auto s = [&](int h, int m) { return scores[index.index(h, m)]; };

  Chart inc_right(n, kNegInf), inc_left(n, kNegInf);
  Chart comp_right(n, kNegInf), comp_left(n, kNegInf);
  EisnerBackpointers bp(n);
  for (int i = 1; i <= n; ++i) comp_right(i, i) = comp_left(i, i) = 0.0;

  for (int width = 1; width < n; ++width) {
    for (int i = 1; i + width <= n; ++i) {
      const int j = i + width;
      double best = kNegInf;
      int arg = i;
      for (int k = i; k < j; ++k) {
        const double v = comp_right(i, k) + comp_left(k + 1, j);
        if (v > best) {
          best = v;
          arg = k;
        }
      }
      inc_right(i, j) = best + s(i, j);
      inc_left(i, j) = best + s(j, i);
      bp.incomplete(i, j) = arg;

      best = kNegInf;
      arg = i + 1;
      for (int k = i + 1; k <= j; ++k) {
        const double v = inc_right(i, k) + comp_right(k, j);
        if (v > best) {
          best = v;
          arg = k;
        }
      }
      comp_right(i, j) = best;
      bp.complete_right(i, j) = arg;

      best = kNegInf;
      arg = i;
      for (int k = i; k < j; ++k) {
        const double v = comp_left(i, k) + inc_left(k, j);
        if (v > best) {
          best = v;
          arg = k;
        }
      }
      comp_left(i, j) = best;
      bp.complete_left(i, j) = arg;
    }
  }

  double best = kNegInf;
  int root_child = 1;
  for (int r = 1; r <= n; ++r) {
    const double v = s(0, r) + comp_left(1, r) + comp_right(r, n);
    if (v > best) {
      best = v;
      root_child = r;
    }
  }

  Heads heads(static_cast<std::size_t>(n + 1), -1);
  heads[static_cast<std::size_t>(root_child)] = 0;
  backtrack_complete_left(bp, 1, root_child, heads);
  backtrack_complete_right(bp, root_child, n, heads);
  return heads;
}

Vector map_tree(const Vector& scores) { return tree_from_heads(map_heads(scores)); }

Marginals marginals(const Vector& scores) {
  const int n = checked_length(scores, "marginals");
  const ArcIndex index(n);
  auto s = [&](int h, int m) { return scores[index.index(h, m)]; };

  // inside pass
  Chart split(n, kNegInf);  // shared log-sum over split points of incomplete spans
  Chart inc_right(n, kNegInf), inc_left(n, kNegInf);
  Chart comp_right(n, kNegInf), comp_left(n, kNegInf);
  for (int i = 1; i <= n; ++i) comp_right(i, i) = comp_left(i, i) = 0.0;

  for (int width = 1; width < n; ++width) {
    for (int i = 1; i + width <= n; ++i) {
      const int j = i + width;
      double acc = kNegInf;
      for (int k = i; k < j; ++k) acc = log_add(acc, comp_right(i, k) + comp_left(k + 1, j));
      split(i, j) = acc;
      inc_right(i, j) = acc + s(i, j);
      inc_left(i, j) = acc + s(j, i);

      acc = kNegInf;
      for (int k = i + 1; k <= j; ++k) acc = log_add(acc, inc_right(i, k) + comp_right(k, j));
      comp_right(i, j) = acc;

      acc = kNegInf;
      for (int k = i; k < j; ++k) acc = log_add(acc, comp_left(i, k) + inc_left(k, j));
      comp_left(i, j) = acc;
    }
  }

  double log_z = kNegInf;
  for (int r = 1; r <= n; ++r) log_z = log_add(log_z, s(0, r) + comp_left(1, r) + comp_right(r, n));

  // outside pass: adjoints d logZ / d chart cell, visited in reverse order
  Marginals out;
  out.log_partition = log_z;
  out.marginals = Vector::Zero(index.size());
  Chart adj_inc_right(n), adj_inc_left(n), adj_comp_right(n), adj_comp_left(n);

  for (int r = 1; r <= n; ++r) {
    const double w = std::exp(s(0, r) + comp_left(1, r) + comp_right(r, n) - log_z);
    out.marginals[index.index(0, r)] += w;
    adj_comp_left(1, r) += w;
    adj_comp_right(r, n) += w;
  }

  for (int width = n - 1; width >= 1; --width) {
    for (int i = 1; i + width <= n; ++i) {
      const int j = i + width;

      if (const double a = adj_comp_right(i, j); a != 0.0) {
        for (int k = i + 1; k <= j; ++k) {
          const double w = a * std::exp(inc_right(i, k) + comp_right(k, j) - comp_right(i, j));
          adj_inc_right(i, k) += w;
          adj_comp_right(k, j) += w;
        }
      }
      if (const double a = adj_comp_left(i, j); a != 0.0) {
        for (int k = i; k < j; ++k) {
          const double w = a * std::exp(comp_left(i, k) + inc_left(k, j) - comp_left(i, j));
          adj_comp_left(i, k) += w;
          adj_inc_left(k, j) += w;
        }
      }

      out.marginals[index.index(i, j)] += adj_inc_right(i, j);
      out.marginals[index.index(j, i)] += adj_inc_left(i, j);
      if (const double a = adj_inc_right(i, j) + adj_inc_left(i, j); a != 0.0) {
        for (int k = i; k < j; ++k) {
          const double w = a * std::exp(comp_right(i, k) + comp_left(k + 1, j) - split(i, j));
          adj_comp_right(i, k) += w;
          adj_comp_left(k + 1, j) += w;
        }
      }
    }
  }
  return out;
}

Vector marginals_vjp(const Vector& scores, const Vector& g) {
  const int n = checked_length(scores, "marginals_vjp");
  require_same_length(scores, g, "marginals_vjp");
  if (n > kMaxExactLength) {
    throw Unsupported("marginals_vjp: exact covariance limited to L <= " + std::to_string(kMaxExactLength));
  }
  const ArcIndex index(n);
  const auto& trees = enumerate_heads(n);

  std::vector<double> log_w(trees.size());
  double log_z = kNegInf;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    log_w[t] = tree_score(index, scores, trees[t]);
    log_z = log_add(log_z, log_w[t]);
  }

  // Cov[z, z] g = E[z (z.g)] - E[z] E[z.g]
  Vector mean = Vector::Zero(index.size());
  Vector weighted = Vector::Zero(index.size());
  double mean_dot = 0.0;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const double p = std::exp(log_w[t] - log_z);
    double dot = 0.0;
    for (int m = 1; m <= n; ++m) dot += g[index.index(trees[t][static_cast<std::size_t>(m)], m)];
    mean_dot += p * dot;
    for (int m = 1; m <= n; ++m) {
      const auto a = index.index(trees[t][static_cast<std::size_t>(m)], m);
      mean[a] += p;
      weighted[a] += p * dot;
    }
  }
  return weighted - mean * mean_dot;
}

Vector sample_perturb_map(const Vector& scores, Rng& rng) {
  checked_length(scores, "sample_perturb_map");
  return map_tree(scores + rng.gumbel_vector(scores.size()));
}

Vector sample_exact(const Vector& scores, Rng& rng) {
  const int n = checked_length(scores, "sample_exact");
  const ArcIndex index(n);
  const auto& trees = enumerate_heads(n);
  Vector log_w(static_cast<Eigen::Index>(trees.size()));
  for (std::size_t t = 0; t < trees.size(); ++t)
    log_w[static_cast<Eigen::Index>(t)] = tree_score(index, scores, trees[t]);
  const Vector w = (log_w.array() - log_w.maxCoeff()).exp();
  return tree_from_heads(trees[rng.categorical(w)]);
}

}  // namespace pullback::treedp
