#pragma once

// Aggregate statistics over training runs: trailing-window smoothing, area
// under the reward curve, and seeded percentile-bootstrap confidence
// intervals.

#include <cstdint>
#include <functional>
#include <vector>

#include "horeg/types.hpp"

namespace horeg::metrics {

/// Trailing moving average; the first window−1 entries average the available
/// prefix. window = 1 is the identity.
std::vector<double> smooth(const std::vector<double>& series, std::size_t window = 50);

/// Trapezoidal area under the curve over the index axis, reported ÷ 10³.
/// A single point has zero area.
double auc(const std::vector<double>& curve);

double mean(const std::vector<double>& values);
double sample_std(const std::vector<double>& values);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Percentile bootstrap (seeded, `resamples` resamples) 2.5%/97.5% bounds of
/// an arbitrary statistic. Throws InsufficientData for fewer than 2 values.
Interval bootstrap_ci95(const std::vector<double>& values,
                        const std::function<double(const std::vector<double>&)>& statistic,
                        std::uint64_t seed, int resamples = 1000);

/// Bootstrap CI of the mean.
Interval bootstrap_ci95_mean(const std::vector<double>& values, std::uint64_t seed,
                             int resamples = 1000);

}  // namespace horeg::metrics
