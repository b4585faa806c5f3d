#pragma once

#include "shadowlab/core.hpp"
#include "shadowlab/excursion.hpp"
#include "shadowlab/field.hpp"
#include "shadowlab/geometry.hpp"
#include "shadowlab/slope.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace shadow {

using Json = nlohmann::json;

Json to_json(const GridSpec& spec);
GridSpec grid_from_json(const Json& j);
Json to_json(const Kernel& k);
/// Throws ConfigError naming the offending key ("kernel.family", ...).
Kernel kernel_from_json(const Json& j);

/// "SHDW1" snapshot: a single JSON header line (magic, spec, seed, kernel,
/// arrays, dtype) followed by the arrays as little-endian float64, row-major,
/// in header order.
struct Snapshot {
    Json header = Json::object();
    std::vector<std::pair<std::string, Grid>> arrays;

    bool has(const std::string& name) const;
    /// Throws FormatError when the array is absent.
    const Grid& array(const std::string& name) const;
    GridSpec spec() const;
};

inline constexpr const char* snapshot_magic = "SHDW1";

void write_snapshot(std::ostream& out, const Snapshot& s);
void write_snapshot(const std::filesystem::path& path, const Snapshot& s);
/// Throws FormatError on a wrong magic, malformed header or short payload.
Snapshot read_snapshot(std::istream& in);
Snapshot read_snapshot(const std::filesystem::path& path);

Snapshot to_snapshot(const FieldSample& fs);
FieldSample field_from_snapshot(const Snapshot& s);
Snapshot to_snapshot(const SlopeField& sf, const Kernel& k, std::uint64_t seed);
SlopeField slope_from_snapshot(const Snapshot& s);
/// Open cells as 1.0, closed as 0.0, plus the component labels.
Snapshot to_snapshot(const ExcursionMask& m);

/// Heatmap of g (one rect per cell, y up) with optional level-line segments
/// given in length units.
std::string svg_heatmap(const Grid& g, double h, const std::vector<Segment>& lines = {});
/// Open cells colored by component.
std::string svg_mask(const ExcursionMask& m);

/// Rows of JSON scalars under named columns.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Json>> rows;

    /// Throws ShapeError when the row length differs from the column count.
    void add(std::vector<Json> row);
};

/// Doubles in shortest round-trip form, inf/nan spelled out.
std::string format_cell(const Json& v);
void write_csv(std::ostream& out, const Table& t);
/// Array of row objects.
Json to_json(const Table& t);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

} // namespace shadow
