#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "pullback/experiments.hpp"
#include "pullback/optimizer.hpp"
#include "pullback/sweep.hpp"
#include "pullback/train.hpp"

using namespace pullback;
using testing::vec;

namespace {

data::MixtureDataset tiny_mixture(std::uint64_t seed = 1) {
  data::MixtureSpec spec;
  spec.n_train = 200;
  spec.n_valid = 100;
  spec.n_test = 100;
  spec.seed = seed;
  return data::gen_mixture(spec);
}

TrainConfig quick(Method m, int epochs = 50) {
  TrainConfig c;
  c.estimator.method = m;
  c.epochs = epochs;
  c.eval_every = 10;
  c.lr = 1e-2;
  return c;
}

RunRecord fake_record(const std::string& method, double lr, std::uint64_t seed, double valid, double test,
                      double recovery) {
  RunRecord r;
  if (method == "linear" || method == "gold") {
    r.config.model = parse_model_kind(method);
  } else {
    r.config.estimator.method = parse_method(method);
  }
  r.config.lr = lr;
  r.config.seed = seed;
  r.valid_accuracy = valid;
  r.test_accuracy = test;
  r.test_recovery = recovery;
  r.decoder_calls_per_example = 1.0;
  return r;
}

}  // namespace

TEST_CASE("adamw") {
  AdamWConfig config;
  SUBCASE("zero gradient leaves parameters unchanged and counts the step") {
    Vector p = vec({1, -2});
    AdamWState state;
    adamw_step(p, Vector::Zero(2), state, 1e-3, config);
    CHECK(p == vec({1, -2}));
    CHECK(state.step == 1);
  }
  SUBCASE("first step moves by lr * g / (|g| + eps)") {
    Vector p = vec({0.5, 0.5, 0.5});
    AdamWState state;
    const Vector g = vec({2.0, -0.5, 1e-3});
    adamw_step(p, g, state, 0.1, config);
    // after bias correction m_hat = g and v_hat = g^2
    for (Eigen::Index i = 0; i < 3; ++i)
      CHECK(std::abs(p[i] - (0.5 - 0.1 * g[i] / (std::abs(g[i]) + 1e-8))) < 1e-15);
  }
  SUBCASE("weight decay alone shrinks by 1 - lr * wd") {
    config.weight_decay = 0.5;
    Vector p = vec({2.0, -4.0});
    AdamWState state;
    adamw_step(p, Vector::Zero(2), state, 0.1, config);
    CHECK(std::abs(p[0] - 2.0 * 0.95) < 1e-15);
    CHECK(std::abs(p[1] + 4.0 * 0.95) < 1e-15);
  }
  SUBCASE("non-finite gradients abort") {
    Vector p = vec({1});
    AdamWState state;
    CHECK_THROWS_AS(adamw_step(p, vec({std::nan("")}), state, 0.1, config), TrainingDiverged);
    CHECK_THROWS_AS(adamw_step(p, vec({1, 2}), state, 0.1, config), InvalidInput);
  }
}

TEST_CASE("train config validation and JSON round-trip") {
  TrainConfig c;
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = {};
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);

  c = {};
  c.estimator.method = Method::SpigotEg;
  c.estimator.k = 3;
  c.estimator.eta = 0.1;
  c.lr = 2e-3;
  c.seed = 42;
  c.optimizer.beta2 = 0.95;
  const auto back = train_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
}

TEST_CASE("run records") {
  const auto ds = tiny_mixture();
  const auto r = train(quick(Method::SteI), ds);
  CHECK_FALSE(r.failed);
  REQUIRE(r.curve.size() == 6);
  for (std::size_t i = 1; i < r.curve.size(); ++i) CHECK(r.curve[i].epoch > r.curve[i - 1].epoch);
  CHECK(r.curve.back().epoch == 50);
  CHECK(r.decoder_calls_per_example == 1.0);
  CHECK(r.recovery_metric == "v_measure");

  std::ostringstream out;
  write_curves_jsonl({r}, out);
  std::istringstream in(out.str());
  const auto back = read_curves_jsonl(in);
  REQUIRE(back.size() == 1);
  CHECK(back[0].same_numbers(r));
  CHECK(back[0].wall_seconds == r.wall_seconds);
}

TEST_CASE("exact-argmax never touches the encoder") {
  const auto ds = tiny_mixture();
  const auto r = train(quick(Method::ExactArgmax, 100), ds);
  const Eigen::Index encoder = 3 * (ds.spec.dims + 1);
  CHECK(r.initial_params.head(encoder) == r.final_params.head(encoder));
  CHECK(r.initial_params.tail(r.initial_params.size() - encoder) !=
        r.final_params.tail(r.final_params.size() - encoder));
}

TEST_CASE("seeded runs are reproducible, different seeds differ") {
  const auto ds = tiny_mixture();
  for (Method m : {Method::SfeBaseline, Method::StGumbel, Method::SpigotCe}) {
    auto c = quick(m, 30);
    c.estimator.k = 2;
    CHECK(train(c, ds).same_numbers(train(c, ds)));
    auto other = c;
    other.seed = 1;
    CHECK_FALSE(train(other, ds).same_numbers(train(c, ds)));
  }
}

TEST_CASE("decoder calls per example follow k") {
  const auto ds = tiny_mixture();
  for (int k : {1, 3}) {
    for (Method m : {Method::SteI, Method::Spigot, Method::SpigotCe, Method::SpigotEg}) {
      auto c = quick(m, 3);
      c.estimator.k = k;
      const bool from_marginals = m == Method::SpigotCe || m == Method::SpigotEg;
      CHECK(train(c, ds).decoder_calls_per_example == (from_marginals ? k + 1 : k));
    }
  }
}

TEST_CASE("the loss decreases early on for the relaxed softmax model") {
  const auto ds = data::gen_mixture(data::MixtureSpec{});
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto c = quick(Method::RelaxedMarg, 100);
    c.lr = 1e-3;
    c.eval_every = 100;
    c.seed = seed;
    const auto r = train(c, ds);
    CHECK(r.curve.back().train_loss < r.curve.front().train_loss);
  }
}

TEST_CASE("baselines") {
  const auto ds = tiny_mixture();
  auto c = quick(Method::SteI, 20);
  c.model = ModelKind::Linear;
  const auto linear = train(c, ds);
  CHECK(linear.test_recovery == 0.0);
  c.model = ModelKind::Gold;
  CHECK(train(c, ds).test_recovery == 1.0);
}

TEST_CASE("divergence marks the run failed and keeps the record") {
  const auto ds = tiny_mixture();
  auto c = quick(Method::SteI, 20);
  c.lr = 1e300;
  const auto r = train(c, ds);
  CHECK(r.failed);
  CHECK_FALSE(r.failure.empty());
  CHECK_FALSE(r.curve.empty());
}

TEST_CASE("tree task") {
  data::StructuredSpec spec;
  spec.n_train = 20;
  spec.n_valid = spec.n_test = 10;
  const auto ds = data::gen_structured_toy(spec);
  for (Method m : {Method::SteI, Method::Spigot, Method::SpigotCe, Method::SpigotEg, Method::SteS,
                   Method::PerturbAndMap, Method::RelaxedMarg, Method::RelaxedSparse}) {
    auto c = quick(m, 3);
    c.eval_every = 1;
    const auto r = train(c, ds);
    CHECK_FALSE(r.failed);
    CHECK(r.recovery_metric == "uas");
  }
  CHECK_THROWS_AS(train(quick(Method::Sfe, 2), ds), Unsupported);
}

TEST_CASE("sweep grid expansion") {
  SweepGrid grid;
  grid.base = quick(Method::SteI, 5);
  grid.methods = {"ste-i", "softmax", "linear"};
  grid.lrs = {1e-3, 2e-3};
  grid.etas = {0.1, 1.0};
  grid.ks = {1};
  grid.seeds = {0, 1};
  const auto configs = expand(grid);
  // ste-i: 2 lr x 2 eta x 2 seeds; softmax and linear: 2 lr x 2 seeds
  CHECK(configs.size() == 8 + 4 + 4);

  grid.methods = {"ste-i"};
  grid.lrs = {1e-3};
  grid.etas = {1.0};
  grid.seeds = {0};
  const auto ds = tiny_mixture();
  const auto result = sweep(grid, ds);
  CHECK(result.records.size() == 1);
  CHECK(result.groups.size() == 1);

  const auto json_grid = sweep_grid_from_json(to_json(grid));
  CHECK(expand(json_grid).size() == 1);

  grid.methods = {"bogus"};
  CHECK_THROWS_AS(grid.validate(), InvalidInput);
}

TEST_CASE("aggregation: median and standard error over seeds") {
  std::vector<RunRecord> records;
  const double tests[] = {0.9, 0.8, 0.95, 0.85};
  for (int s = 0; s < 4; ++s)
    records.push_back(fake_record("ste-i", 1e-3, static_cast<std::uint64_t>(s), 0.5 + 0.1 * s, tests[s], 1.0));
  const auto groups = aggregate(records);
  REQUIRE(groups.size() == 1);
  // sorted: 0.8 0.85 0.9 0.95 -> median 0.875; mean 0.875, sample sd sqrt(0.0125/3)
  CHECK(std::abs(groups[0].test_accuracy_median - 0.875) < 1e-15);
  const double sd = std::sqrt(0.0125 / 3.0);
  CHECK(std::abs(groups[0].test_accuracy_std - sd) < 1e-15);
  CHECK(std::abs(groups[0].test_accuracy_stderr - sd / 2.0) < 1e-15);
  CHECK(groups[0].runs == 4);
  CHECK(groups[0].failed == 0);
}

TEST_CASE("best per method maximises median validation accuracy") {
  std::vector<RunRecord> records{fake_record("softmax", 1e-3, 0, 0.7, 0.7, 0.2),
                                 fake_record("softmax", 2e-3, 0, 0.9, 0.6, 0.1),
                                 fake_record("softmax", 1e-4, 0, 0.8, 0.9, 0.3),
                                 fake_record("linear", 1e-3, 0, 0.6, 0.6, 0.0)};
  const auto best = best_per_method(aggregate(records));
  REQUIRE(best.size() == 2);
  CHECK(best[0].method == "softmax");
  CHECK(best[0].config.lr == 2e-3);
  CHECK(best[1].method == "linear");
}

TEST_CASE("report table") {
  auto failed = fake_record("spigot", 1e-3, 1, 0, 0, 0);
  failed.failed = true;
  failed.failure = "diverged";
  std::vector<RunRecord> records{fake_record("spigot", 1e-3, 0, 0.8, 0.75, 0.2), failed};
  std::ostringstream out;
  write_table_csv(aggregate(records), out);
  std::istringstream lines(out.str());
  std::string header, row, extra;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(header ==
        "method,lr,eta,k,runs,failed,valid_acc_median,test_acc_median,test_acc_stderr,test_acc_std,recovery_median,"
        "recovery_stderr,recovery_std,decoder_calls_per_example");
  // the failed seed is counted in its row rather than dropped
  CHECK(row.rfind("spigot,0.001,1,1,2,1,80,75,", 0) == 0);
  CHECK_FALSE(std::getline(lines, extra));
}

TEST_CASE("sweep records individual failures without aborting") {
  SweepGrid grid;
  grid.base = quick(Method::SteI, 5);
  grid.methods = {"ste-i"};
  grid.lrs = {1e-3};
  grid.etas = {1.0};
  grid.ks = {1};
  grid.seeds = {0, 1, 2};
  const auto result = sweep(
      grid,
      [](const TrainConfig& c) -> RunRecord {
        if (c.seed == 1) throw std::runtime_error("boom");
        RunRecord r;
        r.config = c;
        r.test_accuracy = 0.5;
        return r;
      },
      2);
  REQUIRE(result.records.size() == 3);
  CHECK(result.records[1].failed);
  CHECK(result.records[1].failure == "boom");
  CHECK(result.groups[0].failed == 1);
}

TEST_CASE("pullback-step trend helpers") {
  using experiments::best_index;
  using experiments::non_decreasing_to_best;
  CHECK(best_index({1, 3, 3, 2}) == 1);
  CHECK(non_decreasing_to_best({10, 12, 11, 15, 9}, 2.0));
  CHECK_FALSE(non_decreasing_to_best({10, 7, 15}, 2.0));
  // anything after the best value is ignored
  CHECK(non_decreasing_to_best({20, 5, 1}, 0.0));
  CHECK_THROWS_AS(best_index({}), InvalidInput);
}

TEST_CASE("tune on one seed, then replicate the winner") {
  const auto ds = tiny_mixture();
  experiments::Protocol protocol;
  protocol.base = quick(Method::Spigot, 20);
  protocol.lrs = {1e-3, 1e-2};
  protocol.etas = {0.1, 1.0};
  protocol.tuning_seed = 7;
  protocol.seeds = {7, 8};
  int runs = 0;
  protocol.on_run = [&](const RunRecord&) { ++runs; };
  const auto outcome = experiments::tune_then_replicate("spigot", ds, protocol);
  // four tuning runs, then one more seed at the winner
  CHECK(runs == 5);
  CHECK(outcome.records.size() == 5);
  CHECK(outcome.result.runs == 2);

  double best_valid = -1.0;
  TrainConfig winner;
  for (const auto& r : outcome.records)
    if (r.config.seed == 7 && r.valid_accuracy > best_valid) {
      best_valid = r.valid_accuracy;
      winner = r.config;
    }
  CHECK(group_key(outcome.result.config) == group_key(winner));

  // a tuning seed outside the comparison seeds does not enter the statistics
  protocol.seeds = {8, 9};
  CHECK(experiments::tune_then_replicate("linear", ds, protocol).result.runs == 2);
}

TEST_CASE("pullback-step study keeps one row per k") {
  const auto ds = tiny_mixture();
  experiments::Protocol protocol;
  protocol.base = quick(Method::SpigotCe, 3);
  protocol.seeds = {0};
  std::vector<RunRecord> records;
  const auto points = experiments::pullback_steps("spigot-ce", {1, 4}, 1e-3, 0.1, ds, protocol, &records);
  REQUIRE(points.size() == 2);
  CHECK(points[1].k == 4);
  CHECK(points[1].result.decoder_calls_per_example == 5.0);
  CHECK(records.size() == 2);
}
