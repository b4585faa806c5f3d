#pragma once

#include "shadowlab/core.hpp"
#include "shadowlab/kernel.hpp"
#include "shadowlab/slope.hpp"
#include "shadowlab/stats.hpp"

#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace shadow {

enum class Connectivity { four, eight };
enum class Direction { horizontal, vertical };

inline Connectivity dual(Connectivity c) { return c == Connectivity::four ? Connectivity::eight : Connectivity::four; }

std::string to_string(Connectivity c);
std::string to_string(Direction d);
Connectivity parse_connectivity(const std::string& s);
Direction parse_direction(const std::string& s);

/// Disjoint sets with path halving and union by size.
class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x)
    {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    bool unite(std::size_t a, std::size_t b)
    {
        a = find(a);
        b = find(b);
        if (a == b)
            return false;
        if (size_[a] < size_[b])
            std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
        return true;
    }

    std::size_t size_of(std::size_t x) { return size_[find(x)]; }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> size_;
};

/// Excursion set {alpha <= level} on the non-margin part of the window.
/// labels(y, x) is the component id of an open cell and -1 elsewhere; ids are
/// 0 .. components - 1 in row-major order of first appearance.
struct ExcursionMask {
    GridSpec spec;
    double level = 0.0;
    MaskGrid open;
    Connectivity connectivity = Connectivity::eight;
    IntGrid labels;
    int components = 0;
    int margin = 0;

    bool is_open(Cell c) const { return spec.in_window(c) && open(c.y, c.x) != 0; }
    CellRect interior() const { return {0, 0, spec.nx - margin - 1, spec.ny - 1}; }
};

/// Label connected components of an open/closed grid. Returns the number of
/// components; closed cells get label -1.
int label_components(const MaskGrid& open, Connectivity conn, IntGrid& labels);

/// Build a mask from an explicit open grid (hand-made instances, tests).
ExcursionMask make_mask(const MaskGrid& open, Connectivity conn = Connectivity::eight, double h = 1.0,
                        double level = 0.0, int margin = 0);

ExcursionMask threshold(const SlopeField& sf, double level, Connectivity conn = Connectivity::eight);

/// True iff one component of mask ∩ rect touches both vertical sides
/// (horizontal crossing) or both horizontal sides (vertical crossing).
/// Throws BoundsError when rect leaves the non-margin window.
bool crossing(const ExcursionMask& mask, const CellRect& rect, Direction dir);

/// Crossing by the closed complement under the dual connectivity.
bool closed_crossing(const ExcursionMask& mask, const CellRect& rect, Direction dir);

/// Smallest level at which `crossing` holds on this slope field: the
/// bottleneck value of the best crossing path. +infinity when rect contains
/// margin cells only.
double crossing_threshold(const SlopeField& sf, const CellRect& rect, Direction dir,
                          Connectivity conn = Connectivity::eight);

/// Square annulus {c : r_in < |c - center|_inf <= r_out} in cells.
struct Annulus {
    Cell center;
    int r_in = 1;
    int r_out = 2;
};

/// Length of the shortest open circuit in the annulus separating its inner
/// boundary from the outer one, or nullopt when the closed cells connect the
/// two boundaries. Throws BoundsError when the annulus leaves the non-margin
/// window, ConfigError when 0 < r_in < r_out fails.
std::optional<double> annulus_loop(const ExcursionMask& mask, const Annulus& a);

struct CrossingConfig {
    Kernel kernel = Kernel::gaussian();
    double h = 0.25;
    /// Base rectangle in length units; lambda scales both sides.
    double width = 8.0;
    double height = 8.0;
    double lambda = 1.0;
    Direction direction = Direction::horizontal;
    Connectivity connectivity = Connectivity::eight;
    SlopeOptions slope;
};

struct CrossingEstimate {
    double level = 0.0;
    double lambda = 1.0;
    std::int64_t n = 0;
    std::int64_t successes = 0;
    double p = 0.0;
    stats::Interval ci;
    std::uint64_t seed = 0;
    std::vector<std::uint8_t> outcomes; ///< per sample, coupled across levels
};

/// Per-sample crossing thresholds for the scaled rectangle (sample i uses
/// seed split_seed(master, i)); the coupling across levels is exact.
std::vector<double> crossing_thresholds(const CrossingConfig& cfg, int n_samples, std::uint64_t seed);

CrossingEstimate estimate_from_thresholds(const std::vector<double>& thresholds, double level, double lambda,
                                          std::uint64_t seed);

/// Monte Carlo crossing probability of lambda * rect with a Wilson interval.
CrossingEstimate estimate_crossing_probability(const CrossingConfig& cfg, double level, int n_samples,
                                               std::uint64_t seed);

/// Same samples for every level (common random numbers).
std::vector<CrossingEstimate> estimate_crossing_levels(const CrossingConfig& cfg, const std::vector<double>& levels,
                                                       int n_samples, std::uint64_t seed);

struct CriticalProbe {
    double level = 0.0;
    double p = 0.0;
    stats::Interval ci;
};

struct CriticalLevel {
    double estimate = 0.0; ///< midpoint of the final bracket
    double lo = 0.0;
    double hi = 0.0;
    double side = 0.0;
    int n_samples = 0;
    std::vector<CriticalProbe> probes;
    bool non_monotone = false;
    double bracket_width() const { return hi - lo; }
};

/// Bisection for the level where the horizontal crossing probability of the
/// side x side square is 1/2, a finite-size proxy for the critical level.
CriticalLevel estimate_critical_level(const CrossingConfig& cfg, double side, int n_samples, double tol,
                                      std::uint64_t seed);

} // namespace shadow
