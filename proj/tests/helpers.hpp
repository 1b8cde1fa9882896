#pragma once

#include <doctest.h>

#include <initializer_list>

#include "pullback/types.hpp"

namespace testing {

inline pullback::Vector vec(std::initializer_list<double> values) {
  pullback::Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

inline double max_abs(const pullback::Vector& a, const pullback::Vector& b) {
  REQUIRE(a.size() == b.size());
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

}  // namespace testing
