#include "pullback/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace pullback::metrics {

namespace {

// Summed over sorted counts so the result does not depend on label values.
template <class Map>
double entropy(const Map& counts, double total) {
  std::vector<double> values;
  values.reserve(counts.size());
  for (const auto& entry : counts) values.push_back(entry.second);
  std::sort(values.begin(), values.end());
  double h = 0.0;
  for (double count : values) {
    const double p = count / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw InvalidInput("accuracy: length mismatch");
  if (pred.empty()) throw InvalidInput("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

ClusteringScore v_measure(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw InvalidInput("v_measure: length mismatch");
  if (pred.empty()) throw InvalidInput("v_measure: empty input");
  const auto n = static_cast<double>(pred.size());

  std::map<int, double> classes, clusters;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    classes[truth[i]] += 1.0;
    clusters[pred[i]] += 1.0;
    joint[{truth[i], pred[i]}] += 1.0;
  }
  const double h_class = entropy(classes, n);
  const double h_cluster = entropy(clusters, n);
  const double h_joint = entropy(joint, n);
  // H(C|K) = H(C,K) - H(K), H(K|C) = H(C,K) - H(C)
  ClusteringScore score;
  score.homogeneity = h_class == 0.0 ? 1.0 : 1.0 - (h_joint - h_cluster) / h_class;
  score.completeness = h_cluster == 0.0 ? 1.0 : 1.0 - (h_joint - h_class) / h_cluster;
  // clamp round-off
  score.homogeneity = std::clamp(score.homogeneity, 0.0, 1.0);
  score.completeness = std::clamp(score.completeness, 0.0, 1.0);
  const double sum = score.homogeneity + score.completeness;
  score.v_measure = sum > 0.0 ? 2.0 * score.homogeneity * score.completeness / sum : 0.0;
  return score;
}

double uas(const std::vector<treedp::Heads>& pred, const std::vector<treedp::Heads>& gold) {
  if (pred.size() != gold.size()) throw InvalidInput("uas: number of sentences differs");
  std::size_t tokens = 0, hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != gold[i].size()) throw InvalidInput("uas: sentence length mismatch");
    for (std::size_t m = 1; m < pred[i].size(); ++m) {
      ++tokens;
      hits += pred[i][m] == gold[i][m];
    }
  }
  if (tokens == 0) throw InvalidInput("uas: no tokens");
  return static_cast<double>(hits) / static_cast<double>(tokens);
}

}  // namespace pullback::metrics
