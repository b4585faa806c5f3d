#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace shadow::stats {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
    bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Two-sided standard normal quantile, e.g. z(0.95) = 1.959964.
double normal_quantile(double p);

/// Wilson score interval for a binomial proportion.
Interval wilson(std::int64_t successes, std::int64_t n, double confidence = 0.95);

double mean(std::span<const double> xs);
double variance(std::span<const double> xs); ///< unbiased
double standard_error(std::span<const double> xs);

/// Sample quantile, linear interpolation between order statistics.
double quantile(std::vector<double> xs, double p);

/// Percentile bootstrap interval of a statistic.
Interval bootstrap(std::span<const double> xs, const std::function<double(std::span<const double>)>& stat,
                   int resamples, std::uint64_t seed, double confidence = 0.95);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    int n = 0;
    Interval slope_ci(double confidence = 0.95) const;
};

/// Ordinary least squares y = intercept + slope * x.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Paired difference of two coupled indicator sequences, mean(a - b) with a
/// normal-approximation confidence interval.
struct PairedDifference {
    double mean = 0.0;
    Interval ci;
};
PairedDifference paired_difference(std::span<const double> a, std::span<const double> b, double confidence = 0.95);

} // namespace shadow::stats
