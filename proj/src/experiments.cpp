#include "pullback/experiments.hpp"

#include <algorithm>

namespace pullback::experiments {

namespace {

RunFunction runner(const data::MixtureDataset& dataset, const Protocol& protocol) {
  return [&](const TrainConfig& c) {
    RunRecord r = train(c, dataset);
    if (protocol.on_run) protocol.on_run(r);
    return r;
  };
}

SweepGrid grid_for(const std::string& method, const Protocol& protocol) {
  SweepGrid grid;
  grid.base = protocol.base;
  grid.methods = {method};
  grid.lrs = protocol.lrs;
  grid.etas = protocol.etas;
  grid.ks = {protocol.base.estimator.k};
  grid.seeds = {protocol.tuning_seed};
  return grid;
}

}  // namespace

Outcome tune_then_replicate(const std::string& method, const data::MixtureDataset& dataset, const Protocol& protocol) {
  if (protocol.seeds.empty()) throw InvalidInput("experiments: no seeds");
  const auto run = runner(dataset, protocol);

  const auto tuning = sweep(grid_for(method, protocol), run, protocol.jobs);
  if (tuning.best.empty()) throw InvalidInput("experiments: empty tuning grid for " + method);
  const TrainConfig chosen = tuning.best.front().config;

  Outcome out;
  out.records = tuning.records;

  std::vector<RunRecord> final_runs;
  for (const auto& r : tuning.records)
    if (group_key(r.config) == group_key(chosen)) final_runs.push_back(r);

  SweepGrid rest = grid_for(method, protocol);
  rest.base = chosen;
  rest.lrs = {chosen.lr};
  rest.etas = {chosen.estimator.eta};
  rest.ks = {chosen.estimator.k};
  rest.seeds.clear();
  for (auto s : protocol.seeds)
    if (s != protocol.tuning_seed) rest.seeds.push_back(s);
  if (!rest.seeds.empty()) {
    const auto more = sweep(rest, run, protocol.jobs);
    final_runs.insert(final_runs.end(), more.records.begin(), more.records.end());
    out.records.insert(out.records.end(), more.records.begin(), more.records.end());
  }
  // drop the tuning seed again if it is not one of the comparison seeds
  std::erase_if(final_runs, [&](const RunRecord& r) {
    return std::find(protocol.seeds.begin(), protocol.seeds.end(), r.config.seed) == protocol.seeds.end();
  });
  out.result = aggregate(final_runs).front();
  return out;
}

std::vector<StepPoint> pullback_steps(const std::string& method, const std::vector<int>& ks, double lr, double eta,
                                      const data::MixtureDataset& dataset, const Protocol& protocol,
                                      std::vector<RunRecord>* records) {
  const auto run = runner(dataset, protocol);
  std::vector<StepPoint> points;
  for (int k : ks) {
    SweepGrid grid = grid_for(method, protocol);
    grid.lrs = {lr};
    grid.etas = {eta};
    grid.ks = {k};
    grid.seeds = protocol.seeds;
    const auto result = sweep(grid, run, protocol.jobs);
    if (records) records->insert(records->end(), result.records.begin(), result.records.end());
    points.push_back({k, result.groups.front()});
  }
  return points;
}

std::size_t best_index(const std::vector<double>& values) {
  if (values.empty()) throw InvalidInput("best_index: empty input");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

bool non_decreasing_to_best(const std::vector<double>& values, double slack) {
  const std::size_t best = best_index(values);
  for (std::size_t i = 0; i < best; ++i)
    if (values[i + 1] < values[i] - slack) return false;
  return true;
}

}  // namespace pullback::experiments
