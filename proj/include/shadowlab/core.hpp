#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace shadow {

/// Dense row-major grid. Row index is the y (second) coordinate, column index
/// the x coordinate, so a row is a horizontal line along the sun direction e1.
template <typename Scalar>
using GridT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorT = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

using Grid = GridT<double>;
using IntGrid = GridT<std::int32_t>;
using MaskGrid = GridT<std::uint8_t>;
using Vector = VectorT<double>;

using Point = Eigen::Vector2d;

/// Integer cell coordinates (column x, row y).
struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

/// Inclusive rectangle of cells [x0, x1] x [y0, y1].
struct CellRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0 + 1; }
    int height() const { return y1 - y0 + 1; }
    bool contains(Cell c) const { return c.x >= x0 && c.x <= x1 && c.y >= y0 && c.y <= y1; }
    bool valid() const { return x1 >= x0 && y1 >= y0; }
    friend bool operator==(const CellRect&, const CellRect&) = default;
};

/// Discretization of a window of the plane. Cell (x, y) sits at
/// origin + h * (x, y). The padding is the extra noise border needed so that
/// convolution with a kernel truncated at `pad * h` never wraps around.
struct GridSpec {
    Point origin = Point::Zero();
    double h = 0.25;
    int nx = 256;
    int ny = 256;
    int pad = 0;

    int padded_nx() const { return nx + 2 * pad; }
    int padded_ny() const { return ny + 2 * pad; }
    Point position(Cell c) const { return origin + h * Point(c.x, c.y); }
    bool in_window(Cell c) const { return c.x >= 0 && c.x < nx && c.y >= 0 && c.y < ny; }
    CellRect window() const { return {0, 0, nx - 1, ny - 1}; }

    friend bool operator==(const GridSpec& a, const GridSpec& b)
    {
        return a.origin == b.origin && a.h == b.h && a.nx == b.nx && a.ny == b.ny && a.pad == b.pad;
    }
};

// Errors. Every module throws one of these; the CLI maps them to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};
class OrderError : public Error {
public:
    using Error::Error;
};
class ShapeError : public Error {
public:
    using Error::Error;
};
class BoundsError : public Error {
public:
    using Error::Error;
};
class FormatError : public Error {
public:
    using Error::Error;
};
class ConsistencyError : public Error {
public:
    using Error::Error;
};
class ContractError : public Error {
public:
    using Error::Error;
};
class SupportError : public Error {
public:
    using Error::Error;
};
class IdError : public Error {
public:
    using Error::Error;
};

} // namespace shadow
