#pragma once

#include "shadowlab/core.hpp"
#include "shadowlab/field.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace shadow {

/// Slope and argmax along one row, t in length units (0 = derivative term).
template <typename Scalar>
struct RowSlope {
    VectorT<Scalar> alpha;
    VectorT<Scalar> t;
};

namespace detail {

template <typename Scalar>
inline Scalar chord(const Scalar* f, Eigen::Index i, Eigen::Index j, Scalar h)
{
    return (f[j] - f[i]) / (static_cast<Scalar>(j - i) * h);
}

template <typename Derived1, typename Derived2>
void check_row(const Eigen::DenseBase<Derived1>& f, const Eigen::DenseBase<Derived2>& df1, double h)
{
    if (f.size() != df1.size())
        throw ShapeError("slope row: f and df1 lengths differ");
    if (f.size() < 2)
        throw ShapeError("slope row: length must be at least 2");
    if (!(h > 0))
        throw ShapeError("slope row: spacing must be positive");
}

// Right-to-left sweep over [lo, hi) keeping the upper hull of the points to the
// right of i on a stack. The hull vertex adjacent to i is the one maximizing
// the chord slope from i; points strictly below a chord can never win again.
template <typename Scalar>
void hull_sweep(const Scalar* f, const Scalar* df1, Scalar h, Eigen::Index lo, Eigen::Index hi, Scalar* alpha,
                Scalar* t, std::vector<Eigen::Index>& stack)
{
    stack.clear();
    for (Eigen::Index i = hi - 1; i >= lo; --i) {
        while (stack.size() >= 2 &&
               chord(f, i, stack[stack.size() - 1], h) < chord(f, i, stack[stack.size() - 2], h))
            stack.pop_back();
        Scalar best = df1[i];
        Scalar arg = 0;
        if (!stack.empty()) {
            const Scalar s = chord(f, i, stack.back(), h);
            if (s > best) {
                best = s;
                arg = static_cast<Scalar>(stack.back() - i) * h;
            }
        }
        alpha[i] = best;
        t[i] = arg;
        stack.push_back(i);
    }
}

} // namespace detail

/// Discrete slope field of one row:
///   alpha[i] = max(df1[i], max_{j>i} (f[j] - f[i]) / ((j - i) h)),
/// ties resolved towards the smallest t. O(n) via a right-to-left hull sweep.
template <typename Derived1, typename Derived2>
RowSlope<typename Derived1::Scalar> slope_row_hull(const Eigen::DenseBase<Derived1>& f_row,
                                                   const Eigen::DenseBase<Derived2>& df1_row,
                                                   typename Derived1::Scalar h)
{
    using Scalar = typename Derived1::Scalar;
    detail::check_row(f_row, df1_row, static_cast<double>(h));
    const VectorT<Scalar> f = f_row.derived().template cast<Scalar>().reshaped();
    const VectorT<Scalar> d = df1_row.derived().template cast<Scalar>().reshaped();
    const Eigen::Index n = f.size();
    RowSlope<Scalar> out{VectorT<Scalar>(n), VectorT<Scalar>(n)};
    std::vector<Eigen::Index> stack;
    stack.reserve(static_cast<std::size_t>(n));
    detail::hull_sweep(f.data(), d.data(), h, Eigen::Index{0}, n, out.alpha.data(), out.t.data(), stack);
    return out;
}

/// Same contract as slope_row_hull by direct double loop. Test oracle.
template <typename Derived1, typename Derived2>
RowSlope<typename Derived1::Scalar> slope_row_bruteforce(const Eigen::DenseBase<Derived1>& f_row,
                                                         const Eigen::DenseBase<Derived2>& df1_row,
                                                         typename Derived1::Scalar h, Eigen::Index window = 0)
{
    using Scalar = typename Derived1::Scalar;
    detail::check_row(f_row, df1_row, static_cast<double>(h));
    const VectorT<Scalar> f = f_row.derived().template cast<Scalar>().reshaped();
    const VectorT<Scalar> d = df1_row.derived().template cast<Scalar>().reshaped();
    const Eigen::Index n = f.size();
    RowSlope<Scalar> out{VectorT<Scalar>(n), VectorT<Scalar>(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        Scalar best = d[i];
        Scalar arg = 0;
        const Eigen::Index last = window > 0 ? std::min(n - 1, i + window) : n - 1;
        for (Eigen::Index j = i + 1; j <= last; ++j) {
            const Scalar s = detail::chord(f.data(), i, j, h);
            if (s > best) {
                best = s;
                arg = static_cast<Scalar>(j - i) * h;
            }
        }
        out.alpha[i] = best;
        out.t[i] = arg;
    }
    return out;
}

/// Windowed slope: candidates j with 1 <= j - i <= window. Blocks of size
/// `window`: the part of the window inside i's block comes from the suffix
/// sweep, the part in the next block from a growing prefix hull queried by
/// binary search. O(n log window). window <= 0 leaves only the derivative
/// term; window >= n - 1 is the full sweep.
template <typename Derived1, typename Derived2>
RowSlope<typename Derived1::Scalar> slope_row_window(const Eigen::DenseBase<Derived1>& f_row,
                                                     const Eigen::DenseBase<Derived2>& df1_row,
                                                     typename Derived1::Scalar h, Eigen::Index window)
{
    using Scalar = typename Derived1::Scalar;
    detail::check_row(f_row, df1_row, static_cast<double>(h));
    const Eigen::Index n = f_row.size();
    if (window <= 0) {
        // Only the derivative term remains.
        RowSlope<Scalar> out{df1_row.derived().template cast<Scalar>().reshaped(), VectorT<Scalar>::Zero(n)};
        return out;
    }
    if (window >= n - 1)
        return slope_row_hull(f_row, df1_row, h);

    const VectorT<Scalar> f = f_row.derived().template cast<Scalar>().reshaped();
    const VectorT<Scalar> d = df1_row.derived().template cast<Scalar>().reshaped();
    RowSlope<Scalar> out{VectorT<Scalar>(n), VectorT<Scalar>(n)};
    VectorT<Scalar> near_alpha(n), near_t(n);
    std::vector<Eigen::Index> stack;
    std::vector<Eigen::Index> hull;
    const Scalar* fp = f.data();

    for (Eigen::Index b0 = 0; b0 < n; b0 += window) {
        const Eigen::Index b1 = std::min(n, b0 + window);
        detail::hull_sweep(fp, d.data(), h, b0, b1, near_alpha.data(), near_t.data(), stack);

        hull.clear();
        Eigen::Index next = b1; // next point of block b1.. to append
        for (Eigen::Index i = b0; i < b1; ++i) {
            Scalar best = near_alpha[i];
            Scalar arg = near_t[i];
            const Eigen::Index reach = std::min(n - 1, i + window);
            while (next <= reach) {
                while (hull.size() >= 2 &&
                       detail::chord(fp, hull[hull.size() - 2], hull.back(), h) <=
                           detail::chord(fp, hull[hull.size() - 2], next, h))
                    hull.pop_back();
                hull.push_back(next++);
            }
            if (!hull.empty()) {
                // First k with chord(i, hull[k]) >= chord(i, hull[k+1]).
                std::size_t lo = 0, hi = hull.size() - 1;
                while (lo < hi) {
                    const std::size_t mid = (lo + hi) / 2;
                    if (detail::chord(fp, i, hull[mid], h) >= detail::chord(fp, i, hull[mid + 1], h))
                        hi = mid;
                    else
                        lo = mid + 1;
                }
                const Scalar s = detail::chord(fp, i, hull[lo], h);
                if (s > best) {
                    best = s;
                    arg = static_cast<Scalar>(hull[lo] - i) * h;
                }
            }
            out.alpha[i] = best;
            out.t[i] = arg;
        }
    }
    return out;
}

/// Slope field alpha with argmax ray length. Columns x >= nx - margin lack a
/// sufficient ray and are flagged as boundary-affected.
struct SlopeField {
    GridSpec spec;
    Grid alpha;
    Grid argmax_t;
    int margin = 0;
    std::optional<double> truncation;

    bool in_margin(Cell c) const { return c.x >= spec.nx - margin; }
    /// Non-margin part of the window (empty rect when the margin covers it).
    CellRect interior() const { return {0, 0, spec.nx - margin - 1, spec.ny - 1}; }
};

struct SlopeOptions {
    /// Lowest level of interest; the margin guards windowed sups below it.
    double level_floor = 0.5;
    /// Tolerated probability that an unseen ray beats level_floor.
    double tail_probability = 1e-3;
    /// Explicit margin in cells, overriding the tail-bound heuristic.
    std::optional<int> margin;
};

/// Ray length L such that sum_{n>=0} P(N(0, 2 K(0)) > level_floor (L + n))
/// stays below tail_probability: a union bound over unit steps of the ray.
double margin_length(double k0, double level_floor, double tail_probability);

/// Margin in cells for kernel `k` on spacing h (cached per kernel).
int margin_cells(const Kernel& k, double h, const SlopeOptions& opts = {});

/// Apply the hull sweep to every row of fs.f.
SlopeField slope_field(const FieldSample& fs, const SlopeOptions& opts = {});

/// Sup restricted to rays shorter than `ray_length`, on the given field values.
SlopeField windowed_slope_field(const FieldSample& fs, double ray_length, const SlopeOptions& opts = {});

/// alpha_R from the truncated field; the sup runs over 0 < r < R.
/// Throws ContractError when fs_R carries no truncation.
SlopeField truncated_slope_field(const FieldSample& fs_R, const SlopeOptions& opts = {});

/// Number of candidate offsets k >= 1 with k h < ray_length.
int window_cells(double ray_length, double h);

/// Gradient of alpha at `cell`: (grad f(z + T e1) - grad f(z)) / T, or the
/// first row of the Hessian when T = 0.
Eigen::Vector2d slope_gradient(const FieldSample& fs, const SlopeField& sf, Cell cell);

/// slope_gradient on every cell (margin cells included).
std::array<Grid, 2> slope_gradient_grid(const FieldSample& fs, const SlopeField& sf);

/// Separation of the winning candidate at cell: best slope minus the best
/// candidate outside the winner's hump (the maximal run around the argmax on
/// which candidates decrease away from it). +infinity when nothing lies
/// outside the hump. `window` limits the candidate offsets (0 = whole row).
double argmax_gap(const FieldSample& fs, Cell cell, int window = 0);

} // namespace shadow
