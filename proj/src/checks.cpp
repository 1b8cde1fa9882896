#include "pullback/checks.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "pullback/data.hpp"
#include "pullback/estimators.hpp"
#include "pullback/metrics.hpp"
#include "pullback/models.hpp"
#include "pullback/oracles.hpp"
#include "pullback/simplex.hpp"
#include "pullback/train.hpp"
#include "pullback/treedp.hpp"

namespace pullback::checks {

namespace {

// Running worst-case of one quantity over many random trials.
class Tally {
 public:
  Tally(std::string name, double tolerance) : name_(std::move(name)), tol_(tolerance) {}

  void add(double error) {
    ++trials_;
    if (!(error <= tol_)) ++violations_;
    if (!(error <= worst_)) worst_ = std::isnan(error) ? error : std::max(worst_, error);
  }
  void add_bool(bool ok) { add(ok ? 0.0 : 1.0); }
  void skip() { ++skipped_; }

  CheckResult result() const {
    std::ostringstream d;
    d << trials_ << " trials, worst " << worst_ << " (tol " << tol_ << ")";
    if (violations_) d << ", " << violations_ << " violations";
    if (skipped_) d << ", " << skipped_ << " skipped";
    return {name_, trials_ > 0 && violations_ == 0, d.str()};
  }

 private:
  std::string name_;
  double tol_;
  int trials_ = 0;
  int violations_ = 0;
  int skipped_ = 0;
  double worst_ = 0.0;
};

double max_abs_diff(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

// ||fd - a|| / max(||fd||, ||a||), with a floor for (near) zero gradients.
double relative_error(const Vector& fd, const Vector& analytic) {
  const double scale = std::max({fd.norm(), analytic.norm(), 1e-8});
  return (fd - analytic).norm() / scale;
}

Vector random_scores(Eigen::Index n, Rng& rng) {
  const double scale = 0.25 + 2.75 * rng.uniform();
  return scale * rng.normal_vector(n);
}

Vector random_simplex_point(Eigen::Index k, Rng& rng) {
  Vector w(k);
  for (Eigen::Index i = 0; i < k; ++i) w[i] = -std::log(rng.uniform());
  return w / w.sum();
}

Matrix random_tokens(int d, int length, Rng& rng) {
  Matrix t(d, length);
  for (int j = 0; j < length; ++j) t.col(j) = rng.normal_vector(d);
  return t;
}

std::string label(const std::string& base, int length) { return base + " L=" + std::to_string(length); }

std::set<std::vector<int>> tree_support(const sparsemap::SparseSolution& sol) {
  std::set<std::vector<int>> out;
  for (std::size_t i = 0; i < sol.support.size(); ++i)
    if (sol.weights[static_cast<Eigen::Index>(i)] > 0.0) out.insert(treedp::heads_from_tree(sol.support[i]));
  return out;
}

std::vector<Eigen::Index> simplex_support(const Vector& p) { return simplex::sparsemax_support(p); }

struct RelaxedCase {
  Method method;
  const char* name;
};

}  // namespace

std::vector<CheckResult> inference_checks(const CheckOptions& options) {
  std::vector<CheckResult> out;
  Rng rng(options.seed);

  for (int length : options.lengths) {
    const auto vertices = treedp::enumerate_trees(length);
    const TreeOracle oracle;
    Tally map_score(label("map_tree score equals enumeration maximum", length), 0.0);
    Tally map_valid(label("map_tree returns a valid tree", length), 0.0);
    Tally marg(label("marginals match Gibbs expectation", length), 1e-6);
    Tally logz(label("log partition matches enumeration", length), 1e-6);
    Tally proj(label("SparseMAP matches nearest point over vertices", length), 1e-5);
    Tally cert(label("SparseMAP optimality gap over all vertices", length), 1e-10);
    const Eigen::Index parts = static_cast<Eigen::Index>(length) * length;
    for (int t = 0; t < options.samples; ++t) {
      const Vector s = random_scores(parts, rng);
      const Vector z = treedp::map_tree(s);
      map_valid.add_bool(treedp::is_valid_tree(z));
      map_score.add(std::abs(s.dot(z) - oracles::best_vertex_score(s, vertices)));

      const auto m = treedp::marginals(s);
      marg.add(max_abs_diff(m.marginals, oracles::gibbs_expectation(s, vertices)));
      logz.add(std::abs(m.log_partition - oracles::log_partition(s, vertices)));

      const auto sol = oracle.project(s);
      const auto ref = oracles::nearest_point_in_hull(s, vertices);
      proj.add(ref.converged && sol.converged ? max_abs_diff(sol.mean, ref.point) : 1.0);
      cert.add(oracles::projection_gap(s, sol.mean, vertices));
    }
    for (const auto* t : {&map_score, &map_valid, &marg, &logz, &proj, &cert}) out.push_back(t->result());
  }

  Tally sparsemax("sparsemax matches support-enumeration projection", 1e-8);
  Tally softmax("softmax sums to one and is positive", 1e-12);
  for (int t = 0; t < options.samples * static_cast<int>(options.lengths.size()); ++t) {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.below(9));
    const Vector s = random_scores(k, rng);
    sparsemax.add(max_abs_diff(simplex::sparsemax(s), oracles::simplex_projection_by_supports(s)));
    const Vector p = simplex::softmax(s);
    softmax.add((p.array() > 0.0).all() ? std::abs(p.sum() - 1.0) : 1.0);
  }
  out.push_back(sparsemax.result());
  out.push_back(softmax.result());
  return out;
}

std::vector<CheckResult> gradient_checks(const CheckOptions& options) {
  std::vector<CheckResult> out;
  Rng rng(options.seed + 1);
  const int trials = std::max(5, options.samples / 10);
  constexpr double kTol = 1e-4;

  // gamma: derivative of the downstream loss with respect to mu
  {
    Tally cat("gamma matches finite differences (categorical)", kTol);
    for (int t = 0; t < trials; ++t) {
      const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.below(6));
      const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(6));
      const auto model = models::UnstructuredModel::random(k, d, rng, 1.0);
      const Vector x = rng.normal_vector(d);
      const int y = rng.uniform() < 0.5 ? -1 : 1;
      const Vector mu = random_simplex_point(k, rng);
      const auto f = [&](const Vector& m) { return models::loss(model, x, y, m); };
      cat.add(relative_error(models::finite_diff_gradient(f, mu), models::gamma(model, x, y, mu)));
    }
    out.push_back(cat.result());

    Tally tree("gamma matches finite differences (trees)", kTol);
    for (int length : options.lengths) {
      for (int t = 0; t < trials; ++t) {
        const auto model = models::StructuredToyModel::random(3, 5, rng, 1.0);
        const Matrix tokens = random_tokens(3, length, rng);
        const int y = rng.uniform() < 0.5 ? -1 : 1;
        const Vector mu = treedp::marginals(random_scores(static_cast<Eigen::Index>(length) * length, rng)).marginals;
        const auto f = [&](const Vector& m) { return models::loss(model, tokens, y, m); };
        tree.add(relative_error(models::finite_diff_gradient(f, mu), models::gamma(model, tokens, y, mu)));
      }
    }
    out.push_back(tree.result());
  }

  const SimplexOracle simplex_oracle;
  const TreeOracle tree_oracle;

  // categorical relaxations, end to end through the encoder and decoder
  for (const RelaxedCase rc : {RelaxedCase{Method::RelaxedMarg, "softmax"}, RelaxedCase{Method::RelaxedSparse, "sparsemax"},
                               RelaxedCase{Method::GumbelSoftmax, "gumbel-softmax (fixed noise)"}}) {
    Tally tally(std::string(rc.name) + " parameter gradient matches finite differences", kTol);
    int accepted = 0;
    for (int attempt = 0; attempt < 50 * trials && accepted < trials; ++attempt) {
      const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.below(5));
      const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(5));
      const auto model = models::UnstructuredModel::random(k, d, rng, 1.0);
      const Vector x = rng.normal_vector(d);
      const int y = rng.uniform() < 0.5 ? -1 : 1;
      EstimatorSpec spec;
      spec.method = rc.method;
      spec.temperature = 0.5 + rng.uniform();
      const std::uint64_t noise_seed = rng.next_u64();

      const auto point_at = [&](const models::UnstructuredModel& m) {
        Rng noise(noise_seed);
        return forward_pass(spec, models::encode(m, x), simplex_oracle, noise);
      };
      const auto base = point_at(model);
      const auto support = simplex_support(base.point);
      bool stable = true;
      const auto f = [&](const Vector& theta) {
        auto m = model;
        m.assign(theta);
        const auto fwd = point_at(m);
        if (rc.method == Method::RelaxedSparse && simplex_support(fwd.point) != support) stable = false;
        return models::loss(m, x, y, fwd.point);
      };
      const Vector fd = models::finite_diff_gradient(f, model.flatten());
      if (!stable) {
        tally.skip();
        continue;
      }
      const Vector s = models::encode(model, x);
      const Vector g = models::gamma(model, x, y, base.point);
      GradLossHandle handle([&](const Vector& mu) { return models::gamma(model, x, y, mu); });
      const Surrogate sur = backward_pass(spec, s, base, g, handle, simplex_oracle);
      tally.add(relative_error(fd, models::param_grads(model, x, y, sur.grad, base.point).flatten()));
      ++accepted;
    }
    out.push_back(tally.result());
  }

  // tree relaxations: Marg and SparseMAP
  for (const RelaxedCase rc : {RelaxedCase{Method::RelaxedMarg, "tree marginals"}, RelaxedCase{Method::RelaxedSparse, "SparseMAP"}}) {
    Tally tally(std::string(rc.name) + " parameter gradient matches finite differences", kTol);
    for (int length : options.lengths) {
      int accepted = 0;
      for (int attempt = 0; attempt < 20 * trials && accepted < trials; ++attempt) {
        const auto model = models::StructuredToyModel::random(3, 4, rng, 1.0);
        const Matrix tokens = random_tokens(3, length, rng);
        const int y = rng.uniform() < 0.5 ? -1 : 1;
        EstimatorSpec spec;
        spec.method = rc.method;
        Rng unused(0);
        const auto base = forward_pass(spec, models::encode(model, tokens), tree_oracle, unused);
        const auto support = base.projection ? tree_support(*base.projection) : std::set<std::vector<int>>{};
        bool stable = !base.projection || base.projection->converged;
        const auto f = [&](const Vector& theta) {
          auto m = model;
          m.assign(theta);
          Rng r(0);
          const auto fwd = forward_pass(spec, models::encode(m, tokens), tree_oracle, r);
          if (fwd.projection && (tree_support(*fwd.projection) != support || !fwd.projection->converged)) stable = false;
          return models::loss(m, tokens, y, fwd.point);
        };
        const Vector fd = models::finite_diff_gradient(f, model.flatten());
        if (!stable) {
          tally.skip();
          continue;
        }
        const Vector s = models::encode(model, tokens);
        const Vector g = models::gamma(model, tokens, y, base.point);
        GradLossHandle handle([&](const Vector& mu) { return models::gamma(model, tokens, y, mu); });
        const Surrogate sur = backward_pass(spec, s, base, g, handle, tree_oracle);
        tally.add(relative_error(fd, models::param_grads(model, tokens, y, sur.grad, base.point).flatten()));
        ++accepted;
      }
    }
    out.push_back(tally.result());
  }
  return out;
}

std::vector<CheckResult> estimator_checks(const CheckOptions& options) {
  std::vector<CheckResult> out;
  Rng rng(options.seed + 2);
  const int trials = options.samples;
  const SimplexOracle simplex_oracle;
  const TreeOracle tree_oracle;

  // Random categorical or tree problem with a real decoder behind gamma.
  struct Problem {
    Vector s;
    std::function<Vector(const Vector&)> gamma;
    const PolytopeOracle* oracle;
    std::vector<Vector> vertices;
  };
  const auto categorical = [&]() {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.below(9));
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(5));
    auto model = std::make_shared<models::UnstructuredModel>(models::UnstructuredModel::random(k, d, rng, 1.0));
    auto x = std::make_shared<Vector>(rng.normal_vector(d));
    const int y = rng.uniform() < 0.5 ? -1 : 1;
    Problem p;
    p.s = random_scores(k, rng);
    p.gamma = [model, x, y](const Vector& mu) { return models::gamma(*model, *x, y, mu); };
    p.oracle = &simplex_oracle;
    for (Eigen::Index i = 0; i < k; ++i) p.vertices.push_back(Vector::Unit(k, i));
    return p;
  };
  const auto tree = [&](int length) {
    auto model = std::make_shared<models::StructuredToyModel>(models::StructuredToyModel::random(3, 4, rng, 1.0));
    auto tokens = std::make_shared<Matrix>(random_tokens(3, length, rng));
    const int y = rng.uniform() < 0.5 ? -1 : 1;
    Problem p;
    p.s = random_scores(static_cast<Eigen::Index>(length) * length, rng);
    p.gamma = [model, tokens, y](const Vector& mu) { return models::gamma(*model, *tokens, y, mu); };
    p.oracle = &tree_oracle;
    p.vertices = treedp::enumerate_trees(length);
    return p;
  };
  const auto problems = [&]() {
    std::vector<Problem> ps;
    for (int t = 0; t < trials; ++t) ps.push_back(categorical());
    for (int length : options.lengths)
      for (int t = 0; t < std::max(1, trials / 4); ++t) ps.push_back(tree(length));
    return ps;
  };
  const auto draw_eta = [&]() {
    static const double etas[] = {0.1, 1.0, 2.0};
    return rng.uniform() < 0.5 ? etas[rng.below(3)] : 0.05 + 3.0 * rng.uniform();
  };

  const auto ps = problems();

  Tally ste_i("STE-I with k=1 equals eta * gamma bitwise", 0.0);
  Tally spigot("SPIGOT with k=1 equals z - proj(z - eta * gamma) (independent projection)", 1e-5);
  Tally eg("SPIGOT-EG k=1 equals softmax(s) - softmax(s - eta * gamma) (categorical)", 1e-12);
  Tally iterates("SPIGOT-CE / SPIGOT-EG iterates stay in the marginal polytope", 1e-6);
  Tally calls("decoder calls per example: k (STE-I, SPIGOT), k + 1 (CE, EG)", 0.0);
  for (const auto& p : ps) {
    const double eta = draw_eta();
    const Vector z = p.oracle->map(p.s);

    EstimatorSpec spec;
    spec.eta = eta;
    spec.k = 1;
    {
      GradLossHandle h(p.gamma);
      const Vector g = backward_ste_i(spec, p.s, h, *p.oracle).grad;
      ste_i.add_bool(g == (eta * p.gamma(z)).eval());
    }
    {
      GradLossHandle h(p.gamma);
      const Vector g = backward_spigot(spec, p.s, h, *p.oracle).grad;
      const Vector target = z - eta * p.gamma(z);
      const Vector ref = p.oracle->structured() ? oracles::nearest_point_in_hull(target, p.vertices).point
                                                : oracles::simplex_projection_by_supports(target);
      spigot.add(max_abs_diff(g, z - ref));
    }
    if (!p.oracle->structured()) {
      GradLossHandle h(p.gamma);
      const Vector g = backward_spigot_eg(spec, p.s, h, *p.oracle).grad;
      const Vector mu0 = simplex::softmax(p.s);
      eg.add(max_abs_diff(g, mu0 - simplex::softmax(p.s - eta * p.gamma(mu0))));
    }

    const int k = 1 + static_cast<int>(rng.below(8));
    spec.k = k;
    for (auto fn : {&backward_spigot_ce, &backward_spigot_eg}) {
      GradLossHandle h(p.gamma);
      IterateTrace trace;
      fn(spec, p.s, h, *p.oracle, &trace);
      for (const auto& mu : trace) {
        if (p.oracle->structured()) {
          const bool local = p.oracle->is_mean_point(mu, 1e-6);
          iterates.add(local ? oracles::hull_membership_residual(mu, p.vertices) : 1.0);
        } else {
          iterates.add(simplex::is_simplex_point(mu, 1e-9) ? 0.0 : 1.0);
        }
      }
      iterates.add(static_cast<double>(trace.size()) == k + 1 ? 0.0 : 1.0);
    }

    // the trainer's own decoder call plus those the estimator makes
    for (Method m : {Method::SteI, Method::Spigot, Method::SpigotCe, Method::SpigotEg}) {
      EstimatorSpec e = spec;
      e.method = m;
      Rng r(0);
      const auto fwd = forward_pass(e, p.s, *p.oracle, r);
      GradLossHandle h(p.gamma);
      backward_pass(e, p.s, fwd, p.gamma(fwd.point), h, *p.oracle);
      const bool from_marginals = m == Method::SpigotCe || m == Method::SpigotEg;
      calls.add(std::abs(1 + h.calls() - (from_marginals ? k + 1 : k)));
    }
  }

  // every surrogate vanishes when the downstream gradient is zero
  Tally vanish("all surrogate gradients vanish at gamma = 0", 1e-12);
  for (const auto& p : ps) {
    const auto zero = [](const Vector& mu) { return Vector::Zero(mu.size()).eval(); };
    for (Method m : all_methods()) {
      if (m == Method::Sfe || m == Method::SfeBaseline) continue;
      const bool categorical_only = m == Method::GumbelSoftmax || m == Method::StGumbel;
      if (categorical_only && p.oracle->structured()) continue;
      if (m == Method::PerturbAndMap && !p.oracle->structured()) continue;
      EstimatorSpec e;
      e.method = m;
      e.eta = draw_eta();
      e.k = 1 + static_cast<int>(rng.below(4));
      Rng r(rng.next_u64());
      const auto fwd = forward_pass(e, p.s, *p.oracle, r);
      GradLossHandle h(zero);
      const Surrogate sur = backward_pass(e, p.s, fwd, Vector::Zero(p.s.size()), h, *p.oracle);
      vanish.add(sur.grad.cwiseAbs().maxCoeff());
    }
    if (!p.oracle->structured()) {
      // the score function estimator vanishes when the loss equals the baseline
      const Vector zv = p.oracle->map(p.s);
      vanish.add(sfe_score_gradient(p.s, zv, 0.7, 0.7).cwiseAbs().maxCoeff());
    }
  }

  for (const auto* t : {&ste_i, &spigot, &eg, &iterates, &calls, &vanish}) out.push_back(t->result());
  return out;
}

std::vector<CheckResult> null_gradient_checks(const CheckOptions& options) {
  std::vector<CheckResult> out;
  {
    data::MixtureSpec spec;
    spec.n_train = 300;
    spec.n_valid = spec.n_test = 100;
    spec.seed = options.seed;
    const auto ds = data::gen_mixture(spec);
    TrainConfig config;
    config.estimator.method = Method::ExactArgmax;
    config.epochs = options.train_epochs;
    config.lr = 1e-2;
    const auto r = train(config, ds);
    const auto encoder = spec.clusters * (spec.dims + 1);
    const bool frozen = r.initial_params.head(encoder) == r.final_params.head(encoder);
    const bool moved = r.initial_params.tail(r.initial_params.size() - encoder) !=
                       r.final_params.tail(r.final_params.size() - encoder);
    out.push_back({"exact-argmax leaves the categorical encoder bitwise unchanged", frozen && moved && !r.failed,
                   std::string("encoder ") + (frozen ? "unchanged" : "CHANGED") + ", decoder " +
                       (moved ? "trained" : "did not move")});
  }
  {
    data::StructuredSpec spec;
    spec.n_train = 40;
    spec.n_valid = spec.n_test = 20;
    spec.seed = options.seed;
    const auto ds = data::gen_structured_toy(spec);
    TrainConfig config;
    config.estimator.method = Method::ExactArgmax;
    config.epochs = std::max(1, options.train_epochs / 10);
    config.lr = 1e-2;
    const auto r = train(config, ds);
    const auto d = spec.token_dims;
    const auto h = config.hidden;
    const auto scorer = h * 2 * d + 2 * h;  // scorer weight, bias and output vector
    const bool frozen = r.initial_params.head(scorer) == r.final_params.head(scorer);
    const bool moved = r.initial_params.tail(r.initial_params.size() - scorer) !=
                       r.final_params.tail(r.final_params.size() - scorer);
    out.push_back({"exact-argmax leaves the tree scorer bitwise unchanged", frozen && moved && !r.failed,
                   std::string("scorer ") + (frozen ? "unchanged" : "CHANGED") + ", decoder " +
                       (moved ? "trained" : "did not move")});
  }
  return out;
}

std::vector<CheckResult> v_measure_checks(const CheckOptions& options) {
  Rng rng(options.seed + 3);
  constexpr int kBijections = 100;
  int mismatched = 0;
  int asymmetric = 0;
  int out_of_range = 0;
  for (int b = 0; b < kBijections; ++b) {
    const int n = 50 + static_cast<int>(rng.below(500));
    const int classes = 1 + static_cast<int>(rng.below(6));
    const int clusters = 1 + static_cast<int>(rng.below(8));
    std::vector<int> truth(static_cast<std::size_t>(n)), pred(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      truth[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(static_cast<std::size_t>(classes)));
      // predictions partly aligned with the truth so scores are not all near zero
      pred[static_cast<std::size_t>(i)] = rng.uniform() < 0.6 ? truth[static_cast<std::size_t>(i)] % clusters
                                                              : static_cast<int>(rng.below(static_cast<std::size_t>(clusters)));
    }
    std::vector<int> perm(static_cast<std::size_t>(clusters));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = clusters - 1; i > 0; --i)
      std::swap(perm[static_cast<std::size_t>(i)], perm[rng.below(static_cast<std::size_t>(i + 1))]);
    // relabel into arbitrary (not necessarily contiguous) values
    const int offset = static_cast<int>(rng.below(1000));
    std::vector<int> relabeled(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) relabeled[i] = 7 * perm[static_cast<std::size_t>(pred[i])] + offset;

    const auto a = metrics::v_measure(pred, truth);
    const auto r = metrics::v_measure(relabeled, truth);
    if (a.v_measure != r.v_measure || a.homogeneity != r.homogeneity || a.completeness != r.completeness) ++mismatched;
    if (std::abs(metrics::v_measure(truth, pred).v_measure - a.v_measure) > 1e-12) ++asymmetric;
    if (a.v_measure < 0.0 || a.v_measure > 1.0) ++out_of_range;
  }
  return {{"v-measure invariant under 100 random relabelings (exact)", mismatched == 0,
           std::to_string(mismatched) + " mismatches"},
          {"v-measure symmetric in its arguments and within [0, 1]", asymmetric == 0 && out_of_range == 0,
           std::to_string(asymmetric) + " asymmetric, " + std::to_string(out_of_range) + " out of range"}};
}

std::vector<CheckResult> determinism_checks(const CheckOptions& options) {
  std::vector<CheckResult> out;
  data::MixtureSpec spec;
  spec.n_train = 300;
  spec.n_valid = spec.n_test = 100;
  spec.seed = options.seed;
  const auto ds = data::gen_mixture(spec);
  for (Method m : {Method::SteI, Method::SpigotCe, Method::SfeBaseline, Method::GumbelSoftmax}) {
    TrainConfig config;
    config.estimator.method = m;
    config.estimator.k = 2;
    config.epochs = options.train_epochs;
    config.eval_every = std::max(1, options.train_epochs / 4);
    config.seed = 11;
    const auto a = train(config, ds);
    const auto b = train(config, ds);
    out.push_back({std::string("identical seeded runs give identical records (") + std::string(method_name(m)) + ")",
                   a.same_numbers(b) && !a.failed, a.failed ? a.failure : ""});
  }
  data::StructuredSpec tspec;
  tspec.n_train = 30;
  tspec.n_valid = tspec.n_test = 10;
  tspec.seed = options.seed;
  const auto tds = data::gen_structured_toy(tspec);
  TrainConfig config;
  config.estimator.method = Method::PerturbAndMap;
  config.epochs = std::max(1, options.train_epochs / 20);
  config.eval_every = std::max(1, config.epochs / 2);
  config.seed = 5;
  const auto a = train(config, tds);
  const auto b = train(config, tds);
  out.push_back({"identical seeded runs give identical records (perturb-and-map, trees)", a.same_numbers(b) && !a.failed,
                 a.failed ? a.failure : ""});
  return out;
}

std::vector<CheckResult> run_all(const CheckOptions& options) {
  std::vector<CheckResult> all;
  for (auto fn : {&inference_checks, &gradient_checks, &estimator_checks, &null_gradient_checks, &v_measure_checks,
                  &determinism_checks}) {
    auto part = fn(options);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return !results.empty() &&
         std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

}  // namespace pullback::checks
