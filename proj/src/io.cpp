#include "shadowlab/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace shadow {

Json to_json(const GridSpec& spec)
{
    return {{"origin", {spec.origin.x(), spec.origin.y()}},
            {"h", spec.h},
            {"nx", spec.nx},
            {"ny", spec.ny},
            {"pad", spec.pad}};
}

GridSpec grid_from_json(const Json& j)
{
    try {
        GridSpec s;
        const auto& o = j.at("origin");
        s.origin = Point(o.at(0).get<double>(), o.at(1).get<double>());
        s.h = j.at("h").get<double>();
        s.nx = j.at("nx").get<int>();
        s.ny = j.at("ny").get<int>();
        s.pad = j.at("pad").get<int>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("grid spec: ") + e.what());
    }
}

Json to_json(const Kernel& k)
{
    return {{"family", to_string(k.family())}, {"params", k.params()}, {"trunc_radius", k.trunc_radius()}};
}

Kernel kernel_from_json(const Json& j)
{
    if (!j.is_object())
        throw ConfigError("kernel: expected an object");
    if (!j.contains("family"))
        throw ConfigError("kernel.family: missing");
    if (!j["family"].is_string())
        throw ConfigError("kernel.family: expected a string");
    std::vector<double> params;
    if (j.contains("params")) {
        if (!j["params"].is_array())
            throw ConfigError("kernel.params: expected an array of numbers");
        for (const auto& p : j["params"]) {
            if (!p.is_number())
                throw ConfigError("kernel.params: expected an array of numbers");
            params.push_back(p.get<double>());
        }
    }
    double trunc = -1.0;
    if (j.contains("trunc_radius")) {
        if (!j["trunc_radius"].is_number())
            throw ConfigError("kernel.trunc_radius: expected a number");
        trunc = j["trunc_radius"].get<double>();
    }
    return Kernel(parse_family(j["family"].get<std::string>()), params, trunc);
}

bool Snapshot::has(const std::string& name) const
{
    return std::any_of(arrays.begin(), arrays.end(), [&](const auto& a) { return a.first == name; });
}

const Grid& Snapshot::array(const std::string& name) const
{
    for (const auto& a : arrays)
        if (a.first == name)
            return a.second;
    throw FormatError("snapshot: no array '" + name + "'");
}

GridSpec Snapshot::spec() const
{
    if (!header.contains("spec"))
        throw FormatError("snapshot: header has no grid spec");
    return grid_from_json(header["spec"]);
}

namespace {

void put_le(std::ostream& out, double v)
{
    auto bits = std::bit_cast<std::uint64_t>(v);
    std::array<char, 8> b;
    for (int i = 0; i < 8; ++i) {
        b[static_cast<std::size_t>(i)] = static_cast<char>(bits & 0xFF);
        bits >>= 8;
    }
    out.write(b.data(), 8);
}

double from_le(const unsigned char* b)
{
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i)
        bits = bits << 8 | b[i];
    return std::bit_cast<double>(bits);
}

} // namespace

void write_snapshot(std::ostream& out, const Snapshot& s)
{
    Json h = s.header;
    h["magic"] = snapshot_magic;
    h["dtype"] = "float64";
    h["byte_order"] = "little";
    h["layout"] = "row-major";
    Json list = Json::array();
    for (const auto& [name, g] : s.arrays)
        list.push_back({{"name", name}, {"rows", g.rows()}, {"cols", g.cols()}});
    h["arrays"] = list;
    out << h.dump() << '\n';
    for (const auto& a : s.arrays) {
        const Grid& g = a.second;
        for (Eigen::Index i = 0; i < g.size(); ++i)
            put_le(out, g.data()[i]);
    }
    if (!out)
        throw Error("snapshot: write failed");
}

void write_snapshot(const std::filesystem::path& path, const Snapshot& s)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open '" + path.string() + "' for writing");
    write_snapshot(out, s);
}

Snapshot read_snapshot(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line))
        throw FormatError("snapshot: empty input");
    Snapshot s;
    try {
        s.header = Json::parse(line);
    } catch (const nlohmann::json::exception&) {
        throw FormatError("snapshot: header is not JSON (bad magic?)");
    }
    if (!s.header.is_object() || s.header.value("magic", "") != snapshot_magic)
        throw FormatError(std::string("snapshot: bad magic (expected ") + snapshot_magic + ")");
    if (s.header.value("dtype", "") != "float64")
        throw FormatError("snapshot: unsupported dtype");
    if (!s.header.contains("arrays") || !s.header["arrays"].is_array())
        throw FormatError("snapshot: header lists no arrays");
    std::vector<unsigned char> buf;
    for (const auto& a : s.header["arrays"]) {
        std::string name;
        Eigen::Index rows = 0, cols = 0;
        try {
            name = a.at("name").get<std::string>();
            rows = a.at("rows").get<Eigen::Index>();
            cols = a.at("cols").get<Eigen::Index>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("snapshot: array entry: ") + e.what());
        }
        if (rows < 0 || cols < 0)
            throw FormatError("snapshot: negative array shape");
        Grid g(rows, cols);
        buf.resize(static_cast<std::size_t>(g.size()) * 8);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() != static_cast<std::streamsize>(buf.size()))
            throw FormatError("snapshot: array '" + name + "' is truncated");
        for (Eigen::Index i = 0; i < g.size(); ++i)
            g.data()[i] = from_le(buf.data() + 8 * i);
        s.arrays.emplace_back(name, std::move(g));
    }
    if (in.peek() != std::char_traits<char>::eof())
        throw FormatError("snapshot: trailing bytes after the last array");
    return s;
}

Snapshot read_snapshot(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open '" + path.string() + "'");
    return read_snapshot(in);
}

namespace {

const char* field_names[] = {"f", "df1", "df2", "d2f11", "d2f12", "d2f22"};

void check_shape(const Grid& g, const GridSpec& spec, const std::string& name)
{
    if (g.rows() != spec.ny || g.cols() != spec.nx)
        throw FormatError("snapshot: array '" + name + "' does not match the grid spec");
}

} // namespace

Snapshot to_snapshot(const FieldSample& fs)
{
    Snapshot s;
    s.header = {{"kind", "field"}, {"spec", to_json(fs.spec)}, {"seed", fs.seed}, {"kernel", to_json(fs.kernel)}};
    s.header["truncation"] = fs.truncation ? Json(*fs.truncation) : Json(nullptr);
    const Grid* gs[] = {&fs.f, &fs.df1, &fs.df2, &fs.d2f11, &fs.d2f12, &fs.d2f22};
    for (int i = 0; i < 6; ++i)
        s.arrays.emplace_back(field_names[i], *gs[i]);
    return s;
}

FieldSample field_from_snapshot(const Snapshot& s)
{
    if (s.header.value("kind", "") != "field")
        throw FormatError("snapshot: not a field snapshot");
    const GridSpec spec = s.spec();
    Kernel k = Kernel::gaussian();
    try {
        k = kernel_from_json(s.header.at("kernel"));
    } catch (const ConfigError& e) {
        throw FormatError(std::string("snapshot: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("snapshot: ") + e.what());
    }
    FieldSample fs{spec, k, {}, {}, {}, {}, {}, {}, s.header.value("seed", std::uint64_t{0}), std::nullopt};
    Grid* gs[] = {&fs.f, &fs.df1, &fs.df2, &fs.d2f11, &fs.d2f12, &fs.d2f22};
    for (int i = 0; i < 6; ++i) {
        *gs[i] = s.array(field_names[i]);
        check_shape(*gs[i], spec, field_names[i]);
    }
    if (s.header.contains("truncation") && s.header["truncation"].is_number())
        fs.truncation = s.header["truncation"].get<double>();
    return fs;
}

Snapshot to_snapshot(const SlopeField& sf, const Kernel& k, std::uint64_t seed)
{
    Snapshot s;
    s.header = {{"kind", "slope"}, {"spec", to_json(sf.spec)}, {"seed", seed}, {"kernel", to_json(k)},
                {"margin", sf.margin}};
    s.header["truncation"] = sf.truncation ? Json(*sf.truncation) : Json(nullptr);
    s.arrays.emplace_back("alpha", sf.alpha);
    s.arrays.emplace_back("argmax_t", sf.argmax_t);
    return s;
}

SlopeField slope_from_snapshot(const Snapshot& s)
{
    if (s.header.value("kind", "") != "slope")
        throw FormatError("snapshot: not a slope snapshot");
    SlopeField sf;
    sf.spec = s.spec();
    sf.alpha = s.array("alpha");
    sf.argmax_t = s.array("argmax_t");
    check_shape(sf.alpha, sf.spec, "alpha");
    check_shape(sf.argmax_t, sf.spec, "argmax_t");
    sf.margin = s.header.value("margin", 0);
    if (sf.margin < 0 || sf.margin > sf.spec.nx)
        throw FormatError("snapshot: margin outside the grid");
    if (s.header.contains("truncation") && s.header["truncation"].is_number())
        sf.truncation = s.header["truncation"].get<double>();
    return sf;
}

Snapshot to_snapshot(const ExcursionMask& m)
{
    Snapshot s;
    s.header = {{"kind", "mask"},
                {"spec", to_json(m.spec)},
                {"level", m.level},
                {"connectivity", to_string(m.connectivity)},
                {"components", m.components},
                {"margin", m.margin}};
    s.arrays.emplace_back("open", m.open.cast<double>());
    s.arrays.emplace_back("labels", m.labels.cast<double>());
    return s;
}

namespace {

std::string rgb(double r, double g, double b)
{
    auto c = [](double v) { return static_cast<int>(std::lround(255 * std::clamp(v, 0.0, 1.0))); };
    std::ostringstream s;
    s << '#' << std::hex << std::setfill('0') << std::setw(2) << c(r) << std::setw(2) << c(g) << std::setw(2) << c(b);
    return s.str();
}

// Dark blue through teal to yellow.
std::string ramp(double t)
{
    t = std::clamp(t, 0.0, 1.0);
    return rgb(0.27 + 0.72 * t * t, 0.0 + 0.9 * t, 0.33 + 0.35 * std::sin(3.14159 * t) - 0.2 * t);
}

std::string svg_open(int w, int h)
{
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 "
      << w << ' ' << h << "\" shape-rendering=\"crispEdges\">\n";
    return s.str();
}

} // namespace

std::string svg_heatmap(const Grid& g, double h, const std::vector<Segment>& lines)
{
    const int px = 4;
    const auto nx = static_cast<int>(g.cols()), ny = static_cast<int>(g.rows());
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Eigen::Index i = 0; i < g.size(); ++i)
        if (std::isfinite(g.data()[i])) {
            lo = std::min(lo, g.data()[i]);
            hi = std::max(hi, g.data()[i]);
        }
    const double span = hi > lo ? hi - lo : 1.0;
    std::ostringstream s;
    s << svg_open(nx * px, ny * px);
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
            s << "<rect x=\"" << x * px << "\" y=\"" << (ny - 1 - y) * px << "\" width=\"" << px << "\" height=\""
              << px << "\" fill=\"" << ramp((g(y, x) - lo) / span) << "\"/>\n";
    // Grid point (x, y) sits at the center of its pixel block.
    auto X = [&](double v) { return (v / h + 0.5) * px; };
    auto Y = [&](double v) { return (ny - 0.5 - v / h) * px; };
    for (const auto& l : lines)
        s << "<line x1=\"" << X(l.a.x()) << "\" y1=\"" << Y(l.a.y()) << "\" x2=\"" << X(l.b.x()) << "\" y2=\""
          << Y(l.b.y()) << "\" stroke=\"#ffffff\" stroke-width=\"1\"/>\n";
    s << "</svg>\n";
    return s.str();
}

std::string svg_mask(const ExcursionMask& m)
{
    const int px = 4;
    const int nx = m.spec.nx, ny = m.spec.ny;
    std::ostringstream s;
    s << svg_open(nx * px, ny * px);
    s << "<rect width=\"100%\" height=\"100%\" fill=\"#202020\"/>\n";
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            const int id = m.labels(y, x);
            if (id < 0)
                continue;
            // Golden-angle hues keep neighbouring ids apart.
            const double hue = std::fmod(id * 0.61803398875, 1.0);
            const double r = 0.5 + 0.5 * std::cos(6.2831853 * hue);
            const double g = 0.5 + 0.5 * std::cos(6.2831853 * (hue - 1.0 / 3));
            const double b = 0.5 + 0.5 * std::cos(6.2831853 * (hue - 2.0 / 3));
            s << "<rect x=\"" << x * px << "\" y=\"" << (ny - 1 - y) * px << "\" width=\"" << px << "\" height=\""
              << px << "\" fill=\"" << rgb(r, g, b) << "\"/>\n";
        }
    s << "</svg>\n";
    return s.str();
}

void Table::add(std::vector<Json> row)
{
    if (row.size() != columns.size())
        throw ShapeError("table: row has " + std::to_string(row.size()) + " cells, expected " +
                         std::to_string(columns.size()));
    rows.push_back(std::move(row));
}

std::string format_cell(const Json& v)
{
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::isnan(d))
            return "nan";
        if (std::isinf(d))
            return d > 0 ? "inf" : "-inf";
    }
    if (v.is_null())
        return "";
    return v.dump();
}

void write_csv(std::ostream& out, const Table& t)
{
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        out << (i ? "," : "") << t.columns[i];
    out << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i)
            out << (i ? "," : "") << format_cell(r[i]);
        out << '\n';
    }
}

Json to_json(const Table& t)
{
    Json out = Json::array();
    for (const auto& r : t.rows) {
        Json o = Json::object();
        for (std::size_t i = 0; i < r.size(); ++i) {
            const bool special = r[i].is_number_float() && !std::isfinite(r[i].get<double>());
            o[t.columns[i]] = special ? Json(format_cell(r[i])) : r[i];
        }
        out.push_back(o);
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out)
        throw Error("write to '" + path.string() + "' failed");
}

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open '" + path.string() + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace shadow
