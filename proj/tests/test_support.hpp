#pragma once

/**
 * Shared test fixtures: analytic velocity fields with known closed-form
 * behavior, and instrumentation wrappers.
 */

#include <algorithm>
#include <atomic>
#include <vector>

namespace test_support {

/**
 * Analytic velocity field of the flow whose data distribution is a point mass
 * at `center`: v(x, t) = (x - center) / t. Its time-t marginal starting from
 * standard normal noise is N((1 - t) center, t^2 I), which is the oracle the
 * SDE sampler is checked against. The condition id is ignored.
 */
struct PointMassField {
  std::vector<double> center;

  std::vector<double> operator()(const std::vector<double>& x, double t, int) const {
    const double tc = std::max(t, 1e-8);
    std::vector<double> v(x.size());
    for (size_t i = 0; i < x.size(); ++i) v[i] = (x[i] - center[i]) / tc;
    return v;
  }
};

// Wraps any velocity field and counts evaluations (for cost-model checks).
template <typename F>
struct CountingField {
  const F* inner;
  mutable long count = 0;

  std::vector<double> operator()(const std::vector<double>& x, double t, int c) const {
    ++count;
    return (*inner)(x, t, c);
  }
};

// A field returning a fixed constant velocity regardless of inputs.
struct ConstantField {
  std::vector<double> v;

  std::vector<double> operator()(const std::vector<double>&, double, int) const { return v; }
};

}  // namespace test_support
