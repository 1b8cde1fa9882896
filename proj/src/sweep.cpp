#include "pullback/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "pullback/data.hpp"

namespace pullback {

using nlohmann::json;

namespace {

bool is_baseline(const std::string& name) { return name == "linear" || name == "gold"; }

std::string short_number(double v) { return data::format_double(v); }

std::string percent(double v) { return data::format_double(100.0 * v); }

}  // namespace

void SweepGrid::validate() const {
  if (methods.empty() || lrs.empty() || etas.empty() || ks.empty() || seeds.empty())
    throw InvalidInput("sweep: every grid axis must be non-empty");
  for (const auto& m : methods)
    if (!is_baseline(m)) parse_method(m);
}

SweepGrid sweep_grid_from_json(const json& j) {
  SweepGrid g;
  g.base = train_config_from_json(j.value("base", json::object()));
  g.methods = j.at("methods").get<std::vector<std::string>>();
  g.lrs = j.value("lrs", std::vector<double>{g.base.lr});
  g.etas = j.value("etas", std::vector<double>{g.base.estimator.eta});
  g.ks = j.value("ks", std::vector<int>{g.base.estimator.k});
  g.seeds = j.value("seeds", std::vector<std::uint64_t>{0, 1, 2, 3});
  g.validate();
  return g;
}

json to_json(const SweepGrid& g) {
  return {{"base", to_json(g.base)}, {"methods", g.methods}, {"lrs", g.lrs},
          {"etas", g.etas},          {"ks", g.ks},           {"seeds", g.seeds}};
}

bool uses_pullback_step(const TrainConfig& c) {
  if (c.model != ModelKind::Latent) return false;
  switch (c.estimator.method) {
    case Method::SteI:
    case Method::Spigot:
    case Method::SpigotCe:
    case Method::SpigotEg:
      return true;
    default:
      return false;
  }
}

std::vector<TrainConfig> expand(const SweepGrid& grid) {
  grid.validate();
  std::vector<TrainConfig> out;
  for (const auto& name : grid.methods) {
    TrainConfig proto = grid.base;
    if (is_baseline(name)) {
      proto.model = parse_model_kind(name);
    } else {
      proto.model = ModelKind::Latent;
      proto.estimator.method = parse_method(name);
    }
    const bool pullback = uses_pullback_step(proto);
    const std::vector<double> etas = pullback ? grid.etas : std::vector<double>{grid.base.estimator.eta};
    const std::vector<int> ks = pullback ? grid.ks : std::vector<int>{grid.base.estimator.k};
    for (double lr : grid.lrs)
      for (double eta : etas)
        for (int k : ks)
          for (auto seed : grid.seeds) {
            TrainConfig c = proto;
            c.lr = lr;
            c.estimator.eta = eta;
            c.estimator.k = k;
            c.seed = seed;
            out.push_back(c);
          }
  }
  return out;
}

std::string method_label(const TrainConfig& c) {
  return c.model == ModelKind::Latent ? std::string(method_name(c.estimator.method))
                                      : std::string(model_kind_name(c.model));
}

std::string group_key(const TrainConfig& c) {
  std::ostringstream key;
  key << method_label(c) << "/lr=" << short_number(c.lr);
  if (uses_pullback_step(c)) key << "/eta=" << short_number(c.estimator.eta) << "/k=" << c.estimator.k;
  return key.str();
}

std::string run_key(const TrainConfig& c) { return group_key(c) + "/seed=" + std::to_string(c.seed); }

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double sample_std(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double standard_error(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  return sample_std(values) / std::sqrt(static_cast<double>(values.size()));
}

std::vector<Aggregate> aggregate(const std::vector<RunRecord>& records) {
  std::map<std::string, std::vector<const RunRecord*>> groups;
  std::vector<std::string> order;
  for (const auto& r : records) {
    const auto key = group_key(r.config);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::vector<Aggregate> out;
  for (const auto& key : order) {
    const auto& members = groups[key];
    Aggregate a;
    a.method = method_label(members.front()->config);
    a.config = members.front()->config;
    a.runs = static_cast<int>(members.size());
    std::vector<double> valid, test, recovery, calls;
    for (const auto* r : members) {
      if (r->failed) {
        ++a.failed;
        continue;
      }
      valid.push_back(r->valid_accuracy);
      test.push_back(r->test_accuracy);
      recovery.push_back(r->test_recovery);
      calls.push_back(r->decoder_calls_per_example);
    }
    a.valid_accuracy_median = median(valid);
    a.test_accuracy_median = median(test);
    a.test_accuracy_stderr = standard_error(test);
    a.test_accuracy_std = sample_std(test);
    a.test_recovery_median = median(recovery);
    a.test_recovery_stderr = standard_error(recovery);
    a.test_recovery_std = sample_std(recovery);
    a.decoder_calls_per_example = median(calls);
    out.push_back(a);
  }
  return out;
}

std::vector<Aggregate> best_per_method(const std::vector<Aggregate>& groups) {
  std::vector<Aggregate> best;
  for (const auto& g : groups) {
    auto it = std::find_if(best.begin(), best.end(), [&](const Aggregate& b) { return b.method == g.method; });
    if (it == best.end()) {
      best.push_back(g);
    } else if (g.valid_accuracy_median > it->valid_accuracy_median) {
      *it = g;
    }
  }
  return best;
}

SweepResult sweep(const SweepGrid& grid, const RunFunction& run, int jobs) {
  const auto configs = expand(grid);
  std::vector<RunRecord> records(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        records[i] = run(configs[i]);
      } catch (const std::exception& e) {
        records[i].config = configs[i];
        records[i].failed = true;
        records[i].failure = e.what();
      }
    }
  };
  jobs = std::max(1, jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::sort(records.begin(), records.end(),
            [](const RunRecord& a, const RunRecord& b) { return run_key(a.config) < run_key(b.config); });
  SweepResult result;
  result.groups = aggregate(records);
  result.best = best_per_method(result.groups);
  result.records = std::move(records);
  return result;
}

SweepResult sweep(const SweepGrid& grid, const data::MixtureDataset& dataset, int jobs) {
  return sweep(grid, [&](const TrainConfig& c) { return train(c, dataset); }, jobs);
}

const std::vector<std::string> kTableColumns = {
    "method",          "lr",           "eta",           "k",
    "runs",            "failed",       "valid_acc_median", "test_acc_median",
    "test_acc_stderr", "test_acc_std", "recovery_median", "recovery_stderr",
    "recovery_std",    "decoder_calls_per_example"};

void write_table_csv(const std::vector<Aggregate>& rows, std::ostream& out) {
  for (std::size_t i = 0; i < kTableColumns.size(); ++i) out << (i ? "," : "") << kTableColumns[i];
  out << '\n';
  for (const auto& a : rows) {
    const bool pullback = uses_pullback_step(a.config);
    out << a.method << ',' << short_number(a.config.lr) << ','
        << (pullback ? short_number(a.config.estimator.eta) : "") << ','
        << (pullback ? std::to_string(a.config.estimator.k) : "") << ',' << a.runs << ',' << a.failed << ','
        << percent(a.valid_accuracy_median) << ',' << percent(a.test_accuracy_median) << ','
        << percent(a.test_accuracy_stderr) << ',' << percent(a.test_accuracy_std) << ','
        << percent(a.test_recovery_median) << ',' << percent(a.test_recovery_stderr) << ','
        << percent(a.test_recovery_std) << ',' << short_number(a.decoder_calls_per_example) << '\n';
  }
}

void write_curves_jsonl(const std::vector<RunRecord>& records, std::ostream& out) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<RunRecord> read_curves_jsonl(std::istream& in) {
  std::vector<RunRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(run_record_from_json(json::parse(line)));
  }
  return records;
}

std::vector<RunRecord> load_run_records(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<RunRecord> records;
  for (const auto& f : files) {
    std::ifstream in(f);
    records.push_back(run_record_from_json(json::parse(in)));
  }
  std::sort(records.begin(), records.end(),
            [](const RunRecord& a, const RunRecord& b) { return run_key(a.config) < run_key(b.config); });
  return records;
}

}  // namespace pullback
