#pragma once

#include "shadowlab/core.hpp"
#include "shadowlab/excursion.hpp"
#include "shadowlab/field.hpp"
#include "shadowlab/slope.hpp"
#include "shadowlab/stats.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace shadow {

// ---- chemical distance -----------------------------------------------------

struct PathResult {
    bool found = false;
    double length = 0.0;     ///< Euclidean length in grid length units
    std::vector<Cell> cells; ///< realized shortest path, a to b
};

/// Dijkstra on open cells, steps of length h (axis) and h sqrt(2) (diagonal,
/// eight-connectivity only). Throws BoundsError outside the non-margin window.
PathResult chemical_distance(const ExcursionMask& mask, Cell a, Cell b);

/// Multi-source distances over open cells (infinity where unreachable).
/// Sources that are closed are ignored.
Grid chemical_distances(const ExcursionMask& mask, const std::vector<Cell>& sources);

struct Diameter {
    double value = 0.0;
    bool exact = true; ///< false: double-sweep lower bound
    Cell a, b;
};

/// Chemical diameter of one component: all-pairs when its size is at most
/// exact_cutoff, otherwise the double-sweep lower bound below.
/// Throws IdError for an unknown component.
Diameter chemical_diameter(const ExcursionMask& mask, int component, int exact_cutoff = 400);

/// Lower bound from `sweeps` farthest-point iterations started at each of the
/// component's leftmost, rightmost, lowest and highest cells.
Diameter double_sweep_diameter(const ExcursionMask& mask, int component, int sweeps = 4);

struct ChemicalSum {
    double total = 0.0;
    int components = 0;
    bool exact = true;
};

/// Sum over the components of mask ∩ box of their chemical diameters, each
/// distance measured inside the whole mask.
ChemicalSum s_chem(const ExcursionMask& mask, const CellRect& box, int exact_cutoff = 400);

// ---- level sets --------------------------------------------------------------

struct Segment {
    Point a, b;
    double length() const { return (b - a).norm(); }
};

struct LevelSetStats {
    double level = 0.0;
    CellRect box;
    double length = 0.0;
    int segments = 0;
};

namespace detail {

// Marching squares on the unit square with corners v00 (x, y), v10 (x+1, y),
// v11 (x+1, y+1), v01 (x, y+1). Emits segments in grid-index coordinates.
template <typename Emit>
void march_square(int x, int y, double v00, double v10, double v11, double v01, double level, Emit&& emit)
{
    const int code = (v00 > level) | (v10 > level) << 1 | (v11 > level) << 2 | (v01 > level) << 3;
    if (code == 0 || code == 15)
        return;
    auto t = [level](double a, double b) { return (level - a) / (b - a); };
    // Edge points: bottom, right, top, left.
    auto edge = [&](int e) -> Point {
        switch (e) {
        case 0:
            return {x + t(v00, v10), y};
        case 1:
            return {x + 1.0, y + t(v10, v11)};
        case 2:
            return {x + t(v01, v11), y + 1.0};
        default:
            return {x, y + t(v00, v01)};
        }
    };
    auto seg = [&](int e1, int e2) { emit(edge(e1), edge(e2)); };
    const bool center_above = 0.25 * (v00 + v10 + v11 + v01) > level;
    switch (code) {
    case 1:
    case 14:
        seg(0, 3);
        break;
    case 2:
    case 13:
        seg(0, 1);
        break;
    case 3:
    case 12:
        seg(1, 3);
        break;
    case 4:
    case 11:
        seg(1, 2);
        break;
    case 6:
    case 9:
        seg(0, 2);
        break;
    case 7:
    case 8:
        seg(2, 3);
        break;
    case 5: // v00, v11 above
        if (center_above) {
            seg(0, 1);
            seg(2, 3);
        } else {
            seg(0, 3);
            seg(1, 2);
        }
        break;
    case 10: // v10, v01 above
        if (center_above) {
            seg(0, 3);
            seg(1, 2);
        } else {
            seg(0, 1);
            seg(2, 3);
        }
        break;
    default:
        break;
    }
}

template <typename Derived>
void check_box(const Eigen::DenseBase<Derived>& g, const CellRect& box)
{
    if (!box.valid() || box.x0 < 0 || box.y0 < 0 || box.x1 >= g.cols() || box.y1 >= g.rows())
        throw BoundsError("level set: box outside the grid");
}

} // namespace detail

/// Level-line segments of {g = level} over the squares spanned by the grid
/// points of `box`, in length units (point (x, y) at h (x, y)). A corner
/// equal to the level counts as below it.
template <typename Derived>
std::vector<Segment> level_set_segments(const Eigen::DenseBase<Derived>& g, double level, const CellRect& box,
                                        double h)
{
    detail::check_box(g, box);
    std::vector<Segment> out;
    for (int y = box.y0; y < box.y1; ++y)
        for (int x = box.x0; x < box.x1; ++x)
            detail::march_square(x, y, g(y, x), g(y, x + 1), g(y + 1, x + 1), g(y + 1, x), level,
                                 [&](Point a, Point b) { out.push_back({h * a, h * b}); });
    return out;
}

template <typename Derived>
LevelSetStats level_set_length(const Eigen::DenseBase<Derived>& g, double level, const CellRect& box, double h)
{
    detail::check_box(g, box);
    LevelSetStats s{level, box, 0.0, 0};
    for (int y = box.y0; y < box.y1; ++y)
        for (int x = box.x0; x < box.x1; ++x)
            detail::march_square(x, y, g(y, x), g(y, x + 1), g(y + 1, x + 1), g(y + 1, x), level,
                                 [&](Point a, Point b) {
                                     s.length += h * (b - a).norm();
                                     ++s.segments;
                                 });
    return s;
}

// ---- coarea ------------------------------------------------------------------

/// Test function h(u) for the coarea identity.
struct TestFunction {
    enum class Kind { zero, indicator, bump };
    Kind kind = Kind::indicator;
    double a = 0.0; ///< support [a, b]
    double b = 1.0;

    double operator()(double u) const
    {
        if (kind == Kind::zero || u < a || u > b)
            return 0.0;
        if (kind == Kind::indicator)
            return 1.0;
        const double c = 0.5 * (a + b), r = 0.5 * (b - a);
        const double s = (u - c) / r;
        return s * s < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
    }
};

/// Midpoint level grid: count levels u_k = lo + (k + 1/2) du on [lo, hi].
struct LevelGrid {
    double lo = 0.0;
    double hi = 1.0;
    int count = 200;

    double step() const { return (hi - lo) / count; }
    double level(int k) const { return lo + (k + 0.5) * step(); }
};

struct CoareaResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double rel_err = 0.0;
};

struct CoareaOptions {
    /// Cells whose argmax is separated from the runner-up by less than this
    /// take a centered difference of alpha instead of the ray formula.
    double tie_gap = 1e-9;
};

/// Per-realization coarea identity over the squares of `box`:
///   lhs = sum_squares h(alpha_c) |grad alpha|_c h^2   (c = square center,
///         alpha_c the corner mean, |grad alpha|_c the mean corner norm)
///   rhs = sum_k h(u_k) sigma_{u_k} du.
CoareaResult coarea_check(const SlopeField& sf, const FieldSample& fs, const CellRect& box, const TestFunction& fn,
                          const LevelGrid& levels, const CoareaOptions& opts = {});

/// Same identity for an explicit alpha grid and gradient norm grid.
CoareaResult coarea_check(const Grid& alpha, const Grid& grad_norm, double h, const CellRect& box,
                          const TestFunction& fn, const LevelGrid& levels);

// ---- alpha at the origin, density and Kac-Rice -------------------------------

struct OriginConfig {
    Kernel kernel = Kernel::gaussian();
    double h = 0.1;
    SlopeOptions slope;
};

struct OriginSamples {
    std::vector<double> alpha;
    std::vector<Eigen::Vector2d> gradient;
    std::vector<double> t;
    std::vector<double> gradient_norm() const;
};

/// n independent draws of (alpha, grad alpha, T) at a fixed point; draw i
/// uses seed split_seed(seed, i). Each draw synthesizes a single row long
/// enough to hold the whole ray margin.
OriginSamples sample_alpha_at_origin(const OriginConfig& cfg, int n_samples, std::uint64_t seed);

/// Gaussian kernel density estimate.
class DensityEstimate {
public:
    /// bandwidth <= 0 selects Silverman's rule.
    explicit DensityEstimate(std::vector<double> samples, double bandwidth = 0.0);

    double operator()(double u) const;
    Vector evaluate(const Vector& grid) const;
    /// Trapezoid integral over [lo, hi].
    double integral(double lo, double hi, int steps = 20000) const;

    const std::vector<double>& samples() const { return samples_; }
    double bandwidth() const { return bandwidth_; }
    double min() const { return min_; }
    double max() const { return max_; }

private:
    std::vector<double> samples_;
    double bandwidth_;
    double min_, max_;
};

/// 0.9 min(sd, IQR / 1.34) n^(-1/5).
double silverman_bandwidth(const std::vector<double>& samples);

/// Kernel-regression estimate of E[y | x = u] with a gaussian kernel.
double nadaraya_watson(const std::vector<double>& x, const std::vector<double>& y, double bandwidth, double u);

/// Level-set length per field draw: result[k][i] = sigma_{levels[k]} of draw i
/// on a box x box square (length units). Draw i uses split_seed(seed, i).
std::vector<std::vector<double>> level_length_draws(const OriginConfig& cfg, double box,
                                                    const std::vector<double>& levels, int n_draws,
                                                    std::uint64_t seed);

struct KacRiceRow {
    double level = 0.0;
    double lhs = 0.0; ///< mean sigma over field draws
    double lhs_se = 0.0;
    stats::Interval lhs_ci;
    double rhs = 0.0; ///< vol * NW(level) * KDE(level)
    stats::Interval rhs_ci;
    double density = 0.0;
    double conditional_mean = 0.0;
    bool agree = false;
};

struct KacRiceOptions {
    double bandwidth = 0.0; ///< <= 0: Silverman
    int resamples = 200;
    double confidence = 0.95;
    std::uint64_t seed = 0;
};

/// Compare the Monte Carlo mean of sigma_level with its expectation formula
/// vol E[|grad alpha(0)| | alpha(0) = level] phi(level). The two agree when
/// |lhs - rhs| <= z sqrt(se_lhs^2 + se_rhs^2), se_rhs read off the bootstrap
/// interval. Throws SupportError when a level leaves the sampled range.
std::vector<KacRiceRow> kac_rice_compare(const OriginSamples& samples, const std::vector<double>& levels,
                                         const std::vector<std::vector<double>>& sigma_draws, double volume,
                                         const KacRiceOptions& opts = {});

} // namespace shadow
