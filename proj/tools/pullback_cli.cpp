#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pullback/checks.hpp"
#include "pullback/data.hpp"
#include "pullback/sweep.hpp"
#include "pullback/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pullback;

namespace {

std::string file_stem_for(const TrainConfig& c) {
  std::string key = run_key(c);
  for (char& ch : key)
    if (ch == '/' || ch == '=') ch = '_';
  return key;
}

void write_json(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

void write_reports(const std::vector<RunRecord>& records, const fs::path& dir) {
  fs::create_directories(dir);
  const auto groups = aggregate(records);
  std::ofstream table(dir / "table.csv");
  write_table_csv(groups, table);
  std::ofstream best(dir / "best.csv");
  write_table_csv(best_per_method(groups), best);
  std::ofstream curves(dir / "curves.jsonl");
  write_curves_jsonl(records, curves);
}

void print_run(const RunRecord& r) {
  std::cout << run_key(r.config) << (r.failed ? "  FAILED: " + r.failure : "") << "\n  best epoch " << r.best_epoch
            << "  valid acc " << 100 * r.valid_accuracy << "  test acc " << 100 * r.test_accuracy << "  test "
            << r.recovery_metric << ' ' << 100 * r.test_recovery << "  decoder calls/example "
            << r.decoder_calls_per_example << "  (" << r.wall_seconds << " s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate gradients for discrete and structured latent variables"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset (CSV splits plus dataset.json)");
  std::string gen_kind = "mixture";
  fs::path gen_out;
  fs::path gen_spec;
  data::MixtureSpec mix;
  data::StructuredSpec trees;
  std::uint64_t gen_seed = 1;
  gen->add_option("--kind", gen_kind, "mixture or trees")->check(CLI::IsMember({"mixture", "trees"}));
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--spec", gen_spec, "JSON spec; flags below override it")->check(CLI::ExistingFile);
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--clusters", mix.clusters, "Number of mixture components");
  gen->add_option("--dims", mix.dims, "Input dimension");
  gen->add_option("--noise", mix.noise, "Input noise scale");
  gen->add_option("--label-noise", mix.label_noise, "Label noise, relative to the input noise");
  gen->add_option("--n-train", mix.n_train);
  gen->add_option("--n-valid", mix.n_valid);
  gen->add_option("--n-test", mix.n_test);
  gen->add_option("--min-length", trees.min_length, "Shortest sentence (trees)");
  gen->add_option("--max-length", trees.max_length, "Longest sentence (trees)");

  // train
  auto* tr = app.add_subcommand("train", "Train one model and write its run record");
  std::string tr_method = "ste-i";
  fs::path tr_data, tr_out, tr_config;
  TrainConfig cfg;
  tr->add_option("--config", tr_config, "JSON run config; flags override it")->check(CLI::ExistingFile);
  tr->add_option("--method", tr_method, "Estimator name, or linear / gold for the baselines");
  tr->add_option("--lr", cfg.lr, "Learning rate");
  tr->add_option("--eta", cfg.estimator.eta, "Pullback step size");
  tr->add_option("--k", cfg.estimator.k, "Pullback steps");
  tr->add_option("--temperature", cfg.estimator.temperature, "Gumbel temperature");
  tr->add_option("--seed", cfg.seed, "Run seed");
  tr->add_option("--epochs", cfg.epochs);
  tr->add_option("--batch-size", cfg.batch_size, "0 for full batch");
  tr->add_option("--eval-every", cfg.eval_every);
  tr->add_option("--data", tr_data, "Dataset directory from gen-data")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", tr_out, "Run record (JSON)")->required();

  // sweep
  auto* sw = app.add_subcommand("sweep", "Run a hyperparameter grid");
  fs::path sw_grid, sw_data, sw_out;
  int sw_jobs = 1;
  sw->add_option("--grid", sw_grid, "Grid config (JSON)")->required()->check(CLI::ExistingFile);
  sw->add_option("--data", sw_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  sw->add_option("--out", sw_out, "Output directory")->required();
  sw->add_option("--jobs", sw_jobs, "Parallel runs")->check(CLI::PositiveNumber);

  // check
  auto* ck = app.add_subcommand("check", "Run the oracle and invariant suite");
  checks::CheckOptions ck_opts;
  ck->add_option("--samples", ck_opts.samples, "Random inputs per tree length")->check(CLI::PositiveNumber);
  ck->add_option("--seed", ck_opts.seed);

  // report
  auto* rp = app.add_subcommand("report", "Aggregate run records into table.csv, best.csv and curves.jsonl");
  fs::path rp_runs, rp_out;
  rp->add_option("--runs", rp_runs, "Directory of run records")->required()->check(CLI::ExistingDirectory);
  rp->add_option("--out", rp_out, "Output directory (defaults to --runs)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      if (gen_kind == "mixture") {
        if (!gen_spec.empty()) {
          const auto base = data::mixture_spec_from_json(read_json(gen_spec));
          if (gen->count("--clusters") == 0) mix.clusters = base.clusters;
          if (gen->count("--dims") == 0) mix.dims = base.dims;
          if (gen->count("--noise") == 0) mix.noise = base.noise;
          if (gen->count("--label-noise") == 0) mix.label_noise = base.label_noise;
          if (gen->count("--n-train") == 0) mix.n_train = base.n_train;
          if (gen->count("--n-valid") == 0) mix.n_valid = base.n_valid;
          if (gen->count("--n-test") == 0) mix.n_test = base.n_test;
          if (gen->count("--seed") == 0) gen_seed = base.seed;
          mix.center_radius = base.center_radius;
        }
        mix.seed = gen_seed;
        const auto ds = data::gen_mixture(mix);
        data::save_dataset(ds, gen_out);
        std::cout << "wrote mixture dataset (" << ds.train.size() << '/' << ds.valid.size() << '/'
                  << ds.test.size() << ") to " << gen_out << '\n';
      } else {
        if (!gen_spec.empty()) {
          const auto base = data::structured_spec_from_json(read_json(gen_spec));
          if (gen->count("--min-length") == 0) trees.min_length = base.min_length;
          if (gen->count("--max-length") == 0) trees.max_length = base.max_length;
          if (gen->count("--seed") == 0) gen_seed = base.seed;
          trees.token_dims = base.token_dims;
          trees.hidden = base.hidden;
          trees.n_train = base.n_train;
          trees.n_valid = base.n_valid;
          trees.n_test = base.n_test;
        }
        trees.seed = gen_seed;
        const auto ds = data::gen_structured_toy(trees);
        data::save_dataset(ds, gen_out);
        std::cout << "wrote tree dataset (" << ds.train.size() << '/' << ds.valid.size() << '/' << ds.test.size()
                  << ") to " << gen_out << '\n';
      }
    } else if (*tr) {
      if (!tr_config.empty()) {
        TrainConfig base = train_config_from_json(read_json(tr_config));
        // flags given on the command line win over the file
        if (tr->count("--lr")) base.lr = cfg.lr;
        if (tr->count("--eta")) base.estimator.eta = cfg.estimator.eta;
        if (tr->count("--k")) base.estimator.k = cfg.estimator.k;
        if (tr->count("--temperature")) base.estimator.temperature = cfg.estimator.temperature;
        if (tr->count("--seed")) base.seed = cfg.seed;
        if (tr->count("--epochs")) base.epochs = cfg.epochs;
        if (tr->count("--batch-size")) base.batch_size = cfg.batch_size;
        if (tr->count("--eval-every")) base.eval_every = cfg.eval_every;
        cfg = base;
        if (!tr->count("--method")) tr_method.clear();
      }
      if (tr_method == "linear" || tr_method == "gold") {
        cfg.model = parse_model_kind(tr_method);
      } else if (!tr_method.empty()) {
        cfg.model = ModelKind::Latent;
        cfg.estimator.method = parse_method(tr_method);
      }
      cfg.validate();
      const RunRecord r = data::dataset_kind(tr_data) == "trees" ? train(cfg, data::load_structured_dataset(tr_data))
                                                                  : train(cfg, data::load_dataset(tr_data));
      write_json(to_json(r), tr_out);
      print_run(r);
      return r.failed ? 2 : 0;
    } else if (*sw) {
      const SweepGrid grid = sweep_grid_from_json(read_json(sw_grid));
      SweepResult result;
      if (data::dataset_kind(sw_data) == "trees") {
        const auto ds = data::load_structured_dataset(sw_data);
        result = sweep(grid, [&](const TrainConfig& c) { return train(c, ds); }, sw_jobs);
      } else {
        result = sweep(grid, data::load_dataset(sw_data), sw_jobs);
      }
      for (const auto& r : result.records) {
        write_json(to_json(r), sw_out / "runs" / (file_stem_for(r.config) + ".json"));
        print_run(r);
      }
      write_reports(result.records, sw_out);
      std::cout << "wrote " << result.records.size() << " runs and reports to " << sw_out << '\n';
    } else if (*ck) {
      const auto results = checks::run_all(ck_opts);
      for (const auto& r : results)
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << (r.detail.empty() ? "" : "  " + r.detail) << '\n';
      const bool ok = checks::all_passed(results);
      std::cout << (ok ? "all checks passed\n" : "some checks FAILED\n");
      return ok ? 0 : 1;
    } else if (*rp) {
      const auto records = load_run_records(rp_runs);
      if (records.empty()) throw InvalidInput("report: no run records under " + rp_runs.string());
      write_reports(records, rp_out.empty() ? rp_runs : rp_out);
      std::cout << "aggregated " << records.size() << " runs\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
