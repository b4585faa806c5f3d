#include "shadowlab/slope.hpp"

#include "shadowlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace shadow {

namespace {

double upper_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double kernel_k0(const Kernel& k)
{
    static std::mutex mutex;
    static std::map<std::tuple<int, std::vector<double>, double>, double> cache;
    const auto key = std::make_tuple(static_cast<int>(k.family()), k.params(), k.trunc_radius());
    {
        std::lock_guard lock(mutex);
        if (auto it = cache.find(key); it != cache.end())
            return it->second;
    }
    const auto mode =
        k.family() == KernelFamily::gaussian ? CovarianceMode::closed_form : CovarianceMode::numeric_convolution;
    const double k0 = covariance_at({k, mode}, Point::Zero());
    std::lock_guard lock(mutex);
    cache[key] = k0;
    return k0;
}

SlopeField sweep_rows(const FieldSample& fs, int window, int margin, std::optional<double> truncation)
{
    const GridSpec& spec = fs.spec;
    SlopeField out{spec, Grid(spec.ny, spec.nx), Grid(spec.ny, spec.nx), std::clamp(margin, 0, spec.nx), truncation};
    if (spec.nx < 2) {
        out.alpha = fs.df1;
        out.argmax_t.setZero();
        return out;
    }
    parallel_for(static_cast<std::size_t>(spec.ny), [&](std::size_t r) {
        const auto y = static_cast<Eigen::Index>(r);
        const auto row = window < 0 ? slope_row_hull(fs.f.row(y), fs.df1.row(y), spec.h)
                                    : slope_row_window(fs.f.row(y), fs.df1.row(y), spec.h, window);
        out.alpha.row(y) = row.alpha.transpose();
        out.argmax_t.row(y) = row.t.transpose();
    });
    return out;
}

} // namespace

double margin_length(double k0, double level_floor, double tail_probability)
{
    if (!(k0 > 0.0) || !(level_floor > 0.0) || !(tail_probability > 0.0))
        return 0.0;
    const double sd = std::sqrt(2.0 * k0);
    auto tail_sum = [&](double L) {
        double s = 0.0;
        for (int n = 0; n < 100000; ++n) {
            const double term = upper_tail(level_floor * (L + n) / sd);
            s += term;
            if (term < 1e-18)
                break;
        }
        return s;
    };
    double lo = 0.0, hi = 1.0;
    while (tail_sum(hi) > tail_probability)
        hi *= 2;
    for (int it = 0; it < 60; ++it) {
        const double mid = (lo + hi) / 2;
        (tail_sum(mid) > tail_probability ? lo : hi) = mid;
    }
    return hi;
}

int margin_cells(const Kernel& k, double h, const SlopeOptions& opts)
{
    if (opts.margin)
        return std::max(0, *opts.margin);
    const double L = margin_length(kernel_k0(k), opts.level_floor, opts.tail_probability);
    return static_cast<int>(std::ceil(L / h));
}

int window_cells(double ray_length, double h)
{
    if (!(ray_length > 0.0))
        return 0;
    // Largest k with k h < ray_length.
    auto k = static_cast<long long>(std::ceil(ray_length / h)) - 1;
    while (k > 0 && static_cast<double>(k) * h >= ray_length)
        --k;
    while (static_cast<double>(k + 1) * h < ray_length)
        ++k;
    return static_cast<int>(std::min<long long>(k, 1LL << 30));
}

SlopeField slope_field(const FieldSample& fs, const SlopeOptions& opts)
{
    return sweep_rows(fs, -1, margin_cells(fs.kernel, fs.spec.h, opts), std::nullopt);
}

SlopeField windowed_slope_field(const FieldSample& fs, double ray_length, const SlopeOptions& opts)
{
    const int window = window_cells(ray_length, fs.spec.h);
    const int margin = std::min(window, margin_cells(fs.kernel, fs.spec.h, opts));
    if (window >= fs.spec.nx - 1)
        return sweep_rows(fs, -1, margin, ray_length);
    return sweep_rows(fs, window, margin, ray_length);
}

SlopeField truncated_slope_field(const FieldSample& fs_R, const SlopeOptions& opts)
{
    if (!fs_R.truncation)
        throw ContractError("truncated_slope_field: field sample carries no truncation radius");
    return windowed_slope_field(fs_R, *fs_R.truncation, opts);
}

Eigen::Vector2d slope_gradient(const FieldSample& fs, const SlopeField& sf, Cell cell)
{
    if (!fs.spec.in_window(cell))
        throw BoundsError("slope_gradient: cell outside the window");
    const double T = sf.argmax_t(cell.y, cell.x);
    if (T == 0.0)
        return {fs.d2f11(cell.y, cell.x), fs.d2f12(cell.y, cell.x)};
    const int k = static_cast<int>(std::lround(T / fs.spec.h));
    const int x2 = cell.x + k;
    return {(fs.df1(cell.y, x2) - fs.df1(cell.y, cell.x)) / T, (fs.df2(cell.y, x2) - fs.df2(cell.y, cell.x)) / T};
}

std::array<Grid, 2> slope_gradient_grid(const FieldSample& fs, const SlopeField& sf)
{
    std::array<Grid, 2> g{Grid(fs.spec.ny, fs.spec.nx), Grid(fs.spec.ny, fs.spec.nx)};
    for (int y = 0; y < fs.spec.ny; ++y)
        for (int x = 0; x < fs.spec.nx; ++x) {
            const auto v = slope_gradient(fs, sf, {x, y});
            g[0](y, x) = v.x();
            g[1](y, x) = v.y();
        }
    return g;
}

double argmax_gap(const FieldSample& fs, Cell cell, int window)
{
    if (!fs.spec.in_window(cell))
        throw BoundsError("argmax_gap: cell outside the window");
    const int nx = fs.spec.nx;
    const int last = window > 0 ? std::min(nx - 1, cell.x + window) : nx - 1;
    const int count = last - cell.x + 1; // candidate k = 0 .. last - x
    std::vector<double> c(static_cast<std::size_t>(count));
    c[0] = fs.df1(cell.y, cell.x);
    const double* row = fs.f.row(cell.y).data();
    for (int k = 1; k < count; ++k)
        c[static_cast<std::size_t>(k)] = detail::chord(row, cell.x, cell.x + k, fs.spec.h);

    std::size_t best = 0;
    for (std::size_t k = 1; k < c.size(); ++k)
        if (c[k] > c[best])
            best = k;
    std::size_t lo = best, hi = best;
    while (lo > 0 && c[lo - 1] < c[lo])
        --lo;
    while (hi + 1 < c.size() && c[hi + 1] < c[hi])
        ++hi;
    double second = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c.size(); ++k)
        if (k < lo || k > hi)
            second = std::max(second, c[k]);
    return c[best] - second;
}

} // namespace shadow
