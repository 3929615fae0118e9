#include "horeg/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "horeg/errors.hpp"
#include "horeg/rng.hpp"

namespace horeg::metrics {

std::vector<double> smooth(const std::vector<double>& series, std::size_t window) {
  if (window < 1) throw Error("smoothing window must be >= 1");
  std::vector<double> out(series.size());
  // Each window is summed afresh: no rolling-sum drift, and window 1 is the
  // exact identity.
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t begin = i + 1 >= window ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = begin; j <= i; ++j) sum += series[j];
    out[i] = sum / static_cast<double>(i - begin + 1);
  }
  return out;
}

double auc(const std::vector<double>& curve) {
  if (curve.empty()) throw InsufficientData("auc needs a nonempty curve");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += 0.5 * (curve[i - 1] + curve[i]);
  }
  return area / 1e3;
}

double mean(const std::vector<double>& values) {
  if (values.empty()) throw InsufficientData("mean of an empty sample");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double sample_std(const std::vector<double>& values) {
  if (values.size() < 2) throw InsufficientData("sample std needs at least 2 values");
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

namespace {

// Type-7 quantile (linear interpolation) of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

Interval bootstrap_ci95(const std::vector<double>& values,
                        const std::function<double(const std::vector<double>&)>& statistic,
                        std::uint64_t seed, int resamples) {
  if (values.size() < 2) throw InsufficientData("bootstrap CI needs at least 2 values");
  Rng rng(seed);
  std::vector<double> stats(static_cast<std::size_t>(resamples));
  std::vector<double> resample(values.size());
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      resample[i] = values[rng.uniform_int(values.size())];
    }
    stats[static_cast<std::size_t>(b)] = statistic(resample);
  }
  std::sort(stats.begin(), stats.end());
  return {quantile_sorted(stats, 0.025), quantile_sorted(stats, 0.975)};
}

Interval bootstrap_ci95_mean(const std::vector<double>& values, std::uint64_t seed,
                             int resamples) {
  return bootstrap_ci95(values, [](const std::vector<double>& v) { return mean(v); }, seed,
                        resamples);
}

}  // namespace horeg::metrics
