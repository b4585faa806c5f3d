#include "shadowlab/stats.hpp"

#include "shadowlab/core.hpp"
#include "shadowlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace shadow::stats {

namespace {

// Acklam's rational approximation refined by one Halley step.
double inverse_normal_cdf(double p)
{
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    const double lo = 0.02425;
    double x;
    if (p < lo) {
        const double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= 1 - lo) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        const double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
    return x - u / (1 + x * u / 2);
}

} // namespace

double normal_quantile(double confidence)
{
    if (!(confidence > 0.0 && confidence < 1.0))
        throw ConfigError("confidence must lie in (0, 1)");
    return inverse_normal_cdf(0.5 + confidence / 2);
}

Interval wilson(std::int64_t successes, std::int64_t n, double confidence)
{
    if (n <= 0)
        return {0.0, 1.0};
    const double z = normal_quantile(confidence);
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(successes) / nn;
    const double denom = 1 + z * z / nn;
    const double centre = (p + z * z / (2 * nn)) / denom;
    const double half = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

double mean(std::span<const double> xs)
{
    if (xs.empty())
        return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs)
{
    if (xs.size() < 2)
        return 0.0;
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs)
        s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

double standard_error(std::span<const double> xs)
{
    if (xs.size() < 2)
        return 0.0;
    return std::sqrt(variance(xs) / static_cast<double>(xs.size()));
}

double quantile(std::vector<double> xs, double p)
{
    if (xs.empty())
        return std::nan("");
    std::sort(xs.begin(), xs.end());
    const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(xs.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= xs.size())
        return xs.back();
    return xs[i] + frac * (xs[i + 1] - xs[i]);
}

Interval bootstrap(std::span<const double> xs, const std::function<double(std::span<const double>)>& stat,
                   int resamples, std::uint64_t seed, double confidence)
{
    if (xs.empty() || resamples < 1)
        return {std::nan(""), std::nan("")};
    std::vector<double> values(static_cast<std::size_t>(resamples));
    std::vector<double> draw(xs.size());
    for (int b = 0; b < resamples; ++b) {
        RngStream rng(split_seed(seed, static_cast<std::uint64_t>(b)));
        for (auto& d : draw)
            d = xs[rng.below(xs.size())];
        values[static_cast<std::size_t>(b)] = stat(draw);
    }
    const double tail = (1 - confidence) / 2;
    return {quantile(values, tail), quantile(values, 1 - tail)};
}

Interval LinearFit::slope_ci(double confidence) const
{
    // Normal approximation; campaigns fit a handful of points so this is a
    // rough band, reported together with n.
    const double z = normal_quantile(confidence);
    return {slope - z * slope_se, slope + z * slope_se};
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw ShapeError("linear_fit: x and y differ in length");
    LinearFit fit;
    fit.n = static_cast<int>(x.size());
    if (x.size() < 2)
        return fit;
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0)
        return fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (x.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - fit.intercept - fit.slope * x[i];
            rss += r * r;
        }
        fit.slope_se = std::sqrt(rss / static_cast<double>(x.size() - 2) / sxx);
    }
    return fit;
}

PairedDifference paired_difference(std::span<const double> a, std::span<const double> b, double confidence)
{
    if (a.size() != b.size())
        throw ShapeError("paired_difference: sequences differ in length");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        d[i] = a[i] - b[i];
    PairedDifference out;
    out.mean = mean(d);
    const double half = normal_quantile(confidence) * standard_error(d);
    out.ci = {out.mean - half, out.mean + half};
    return out;
}

} // namespace shadow::stats
