#pragma once

#include <vector>

#include "pullback/treedp.hpp"

namespace pullback::metrics {

/// Fraction of positions where pred == truth.
double accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

struct ClusteringScore {
  double homogeneity = 0.0;
  double completeness = 0.0;
  double v_measure = 0.0;
};

/// Entropy-based V-measure (natural logs). h = 1 when the true classes have
/// zero entropy and c = 1 when the predicted clusters do; v = 0 if h + c = 0.
/// Independent of the label values used on either side.
ClusteringScore v_measure(const std::vector<int>& pred, const std::vector<int>& truth);

/// Fraction of tokens whose predicted head matches the gold head.
double uas(const std::vector<treedp::Heads>& pred, const std::vector<treedp::Heads>& gold);

}  // namespace pullback::metrics
