#include "shadowlab/excursion.hpp"
#include "shadowlab/experiments.hpp"
#include "shadowlab/field.hpp"
#include "shadowlab/geometry.hpp"
#include "shadowlab/io.hpp"
#include "shadowlab/parallel.hpp"
#include "shadowlab/slope.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace shadow;

namespace {

enum Exit { ok = 0, other = 1, config = 2, bounds = 3, format = 4, consistency = 5 };

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string utc_now()
{
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Everything a run needs, resolved from config, flags and environment. A
// manifest stores exactly this, so reruns go through the same code path.
struct Run {
    std::string command;
    Json params = Json::object();
    std::uint64_t seed = 1;
    std::string out = ".";
    std::string format = "csv";
    std::string config_path;
};

bool to_stdout(const Run& r) { return r.out == "-"; }

fs::path out_dir(const Run& r)
{
    fs::create_directories(r.out);
    return r.out;
}

std::string input_hash(const std::string& path) { return hex64(fnv1a(read_text(path))); }

// Input files are recorded with their hash; a rerun refuses changed inputs.
void record_input(Run& r, const char* key)
{
    if (!r.params.contains(key) || !r.params[key].is_string())
        return;
    const std::string path = r.params[key];
    if (!fs::exists(path))
        throw Error("input '" + path + "' does not exist");
    r.params[std::string(key) + "_hash"] = input_hash(path);
}

void check_input(const Run& r, const char* key)
{
    const std::string hk = std::string(key) + "_hash";
    if (!r.params.contains(key) || !r.params.contains(hk))
        return;
    if (input_hash(r.params[key].get<std::string>()) != r.params[hk].get<std::string>())
        throw ConsistencyError("input '" + r.params[key].get<std::string>() + "' changed since the manifest was written");
}

Snapshot load(const std::string& path)
{
    if (!fs::exists(path))
        throw Error("input '" + path + "' does not exist");
    return read_snapshot(fs::path(path));
}

Snapshot stamp(Snapshot s)
{
    s.header["manifest"] = "manifest.json";
    return s;
}

void write_table(const Run& r, const std::string& name, const Table& t, const Json& summary,
                 std::vector<fs::path>& files)
{
    if (to_stdout(r)) {
        if (r.format == "json")
            std::cout << Json{{"rows", to_json(t)}, {"summary", summary}}.dump(2) << '\n';
        else
            write_csv(std::cout, t);
        return;
    }
    const auto dir = out_dir(r);
    const auto path = dir / (name + "." + r.format);
    if (r.format == "json") {
        write_text(path, to_json(t).dump(2) + "\n");
    } else {
        std::ofstream f(path, std::ios::binary);
        write_csv(f, t);
    }
    files.push_back(path);
    const auto meta = dir / (name + ".meta.json");
    write_text(meta, Json{{"command", r.command},
                          {"tool_version", tool_version},
                          {"seed", r.seed},
                          {"summary", summary},
                          {"manifest", "manifest.json"}}
                         .dump(2) +
                         "\n");
    files.push_back(meta);
}

// ---- subcommands ------------------------------------------------------------------

Kernel kernel_of(const Json& p)
{
    if (!p.contains("kernel"))
        throw ConfigError("kernel.family: missing (pass --kernel or a config with kernel.family)");
    return kernel_from_json(p["kernel"]);
}

int positive_int(const Json& p, const char* key)
{
    if (!p.contains(key) || !p[key].is_number_integer() || p[key].get<int>() < 1)
        throw ConfigError(std::string(key) + ": expected a positive integer");
    return p[key].get<int>();
}

double real(const Json& p, const char* key)
{
    if (!p.contains(key) || !p[key].is_number())
        throw ConfigError(std::string(key) + ": expected a number");
    return p[key].get<double>();
}

Cell cell_of(const Json& p, const char* key)
{
    if (!p.contains(key) || !p[key].is_array() || p[key].size() != 2)
        throw ConfigError(std::string(key) + ": expected two integers x,y");
    return {p[key][0].get<int>(), p[key][1].get<int>()};
}

SlopeOptions slope_options(const Json& p)
{
    SlopeOptions o;
    if (p.contains("level_floor"))
        o.level_floor = real(p, "level_floor");
    if (p.contains("margin") && !p["margin"].is_null())
        o.margin = p["margin"].get<int>();
    return o;
}

std::vector<fs::path> cmd_field(const Run& r)
{
    const Kernel k = kernel_of(r.params);
    const GridSpec spec = make_grid(k, positive_int(r.params, "nx"), positive_int(r.params, "ny"), real(r.params, "h"));
    const Grid noise = sample_white_noise(spec, r.seed);
    const bool truncated = r.params.contains("truncation") && !r.params["truncation"].is_null();
    const FieldSample fs = truncated ? truncated_field(noise, k, real(r.params, "truncation"), spec, r.seed)
                                     : convolve_field(noise, k, spec, r.seed);
    if (to_stdout(r)) {
        write_snapshot(std::cout, to_snapshot(fs));
        return {};
    }
    const auto dir = out_dir(r);
    std::vector<fs::path> files{dir / "field.shdw"};
    write_snapshot(files[0], stamp(to_snapshot(fs)));
    if (r.params.value("svg", false)) {
        files.push_back(dir / "field.svg");
        write_text(files.back(), svg_heatmap(fs.f, spec.h));
    }
    return files;
}

// A slope snapshot, or a field snapshot turned into one.
SlopeField slope_input(const Run& r, std::optional<GridSpec>& spec_out)
{
    const Snapshot s = load(r.params.at("input").get<std::string>());
    SlopeField sf;
    if (s.header.value("kind", "") == "field")
        sf = slope_field(field_from_snapshot(s), slope_options(r.params));
    else
        sf = slope_from_snapshot(s);
    spec_out = sf.spec;
    if (r.params.contains("field") && r.params["field"].is_string()) {
        const Snapshot f = load(r.params["field"].get<std::string>());
        if (!(f.spec() == sf.spec))
            throw ConsistencyError("grid specs of '" + r.params["input"].get<std::string>() + "' and '" +
                                   r.params["field"].get<std::string>() + "' differ");
    }
    return sf;
}

std::vector<fs::path> cmd_slope(const Run& r)
{
    const Snapshot s = load(r.params.at("input").get<std::string>());
    const FieldSample fs = field_from_snapshot(s);
    const SlopeOptions o = slope_options(r.params);
    SlopeField sf;
    if (r.params.contains("window") && !r.params["window"].is_null())
        sf = windowed_slope_field(fs, real(r.params, "window"), o);
    else if (fs.truncation)
        sf = truncated_slope_field(fs, o);
    else
        sf = slope_field(fs, o);
    const Snapshot out = to_snapshot(sf, fs.kernel, fs.seed);
    if (to_stdout(r)) {
        write_snapshot(std::cout, out);
        return {};
    }
    const auto dir = out_dir(r);
    std::vector<fs::path> files{dir / "slope.shdw"};
    write_snapshot(files[0], stamp(out));
    if (r.params.value("svg", false)) {
        files.push_back(dir / "slope.svg");
        write_text(files.back(), svg_heatmap(sf.alpha, sf.spec.h));
    }
    return files;
}

std::vector<fs::path> cmd_perc(const Run& r)
{
    std::optional<GridSpec> spec;
    const SlopeField sf = slope_input(r, spec);
    const double level = real(r.params, "level");
    const Connectivity conn = parse_connectivity(r.params.value("connectivity", "eight"));
    const Direction dir = parse_direction(r.params.value("direction", "horizontal"));
    const ExcursionMask m = threshold(sf, level, conn);
    CellRect rect = m.interior();
    if (r.params.contains("rect") && r.params["rect"].is_array()) {
        const auto& a = r.params["rect"];
        if (a.size() != 4)
            throw ConfigError("rect: expected x0,y0,x1,y1");
        rect = {a[0].get<int>(), a[1].get<int>(), a[2].get<int>(), a[3].get<int>()};
    }
    if (!rect.valid())
        throw BoundsError("rect: the non-margin window is empty");
    const bool open = crossing(m, rect, dir);
    const bool closed = closed_crossing(m, rect, dir);
    const double thr = crossing_threshold(sf, rect, dir, conn);
    Table t;
    t.columns = {"level", "direction", "connectivity", "x0", "y0", "x1", "y1", "crossing", "closed_crossing",
                 "components", "crossing_level", "seed"};
    t.add({level, to_string(dir), to_string(conn), rect.x0, rect.y0, rect.x1, rect.y1, open ? 1 : 0, closed ? 1 : 0,
           m.components, thr, r.seed});
    std::vector<fs::path> files;
    write_table(r, "perc", t, Json{{"crossing", open}}, files);
    if (!to_stdout(r)) {
        const auto d = out_dir(r);
        files.push_back(d / "mask.shdw");
        write_snapshot(files.back(), stamp(to_snapshot(m)));
        if (r.params.value("svg", false)) {
            files.push_back(d / "mask.svg");
            write_text(files.back(), svg_mask(m));
        }
    }
    return files;
}

std::vector<fs::path> cmd_chemdist(const Run& r)
{
    std::optional<GridSpec> spec;
    const SlopeField sf = slope_input(r, spec);
    const ExcursionMask m =
        threshold(sf, real(r.params, "level"), parse_connectivity(r.params.value("connectivity", "eight")));
    const Cell a = cell_of(r.params, "from"), b = cell_of(r.params, "to");
    const PathResult p = chemical_distance(m, a, b);
    Table t;
    t.columns = {"a_x", "a_y", "b_x", "b_y", "found", "length", "seed"};
    t.add({a.x, a.y, b.x, b.y, p.found ? 1 : 0, p.found ? p.length : std::numeric_limits<double>::infinity(), r.seed});
    std::vector<fs::path> files;
    write_table(r, "chemdist", t, Json{{"found", p.found}, {"path_cells", p.cells.size()}}, files);
    if (!to_stdout(r) && r.params.value("svg", false)) {
        std::vector<Segment> segs;
        for (std::size_t i = 1; i < p.cells.size(); ++i)
            segs.push_back({sf.spec.h * Point(p.cells[i - 1].x, p.cells[i - 1].y),
                            sf.spec.h * Point(p.cells[i].x, p.cells[i].y)});
        files.push_back(out_dir(r) / "chemdist.svg");
        write_text(files.back(), svg_heatmap(sf.alpha, sf.spec.h, segs));
    }
    return files;
}

std::vector<fs::path> cmd_lc(const Run& r)
{
    CrossingConfig c;
    c.kernel = kernel_of(r.params);
    c.h = real(r.params, "h");
    c.connectivity = parse_connectivity(r.params.value("connectivity", "eight"));
    c.slope = slope_options(r.params);
    const auto crit = estimate_critical_level(c, real(r.params, "side"), positive_int(r.params, "n_samples"),
                                              real(r.params, "tol"), r.seed);
    Table t;
    t.columns = {"level", "p", "ci_lo", "ci_hi", "seed"};
    for (const auto& p : crit.probes)
        t.add({p.level, p.p, p.ci.lo, p.ci.hi, r.seed});
    std::vector<fs::path> files;
    write_table(r, "lc", t,
                Json{{"estimate", crit.estimate},
                     {"lo", crit.lo},
                     {"hi", crit.hi},
                     {"bracket_width", crit.bracket_width()},
                     {"non_monotone", crit.non_monotone}},
                files);
    return files;
}

std::vector<fs::path> cmd_experiment(const Run& r)
{
    ExperimentConfig cfg = experiment_from_json(r.params);
    cfg.seed = r.seed;
    const ExperimentResult res = run_experiment(cfg);
    std::cerr << res.name << ": " << res.table.rows.size() << " rows in " << res.wall_seconds << " s\n";
    if (to_stdout(r)) {
        std::vector<fs::path> none;
        write_table(r, res.name, res.table, res.summary, none);
        return {};
    }
    auto files = write_result(res, out_dir(r), r.format);
    // Point the metadata at the manifest.
    Json meta = Json::parse(read_text(files.back()));
    meta["manifest"] = "manifest.json";
    write_text(files.back(), meta.dump(2) + "\n");
    return files;
}

std::vector<fs::path> execute(const Run& r)
{
    check_input(r, "input");
    check_input(r, "field");
    if (r.format != "csv" && r.format != "json")
        throw ConfigError("format: expected csv or json");
    if (r.command == "field")
        return cmd_field(r);
    if (r.command == "slope")
        return cmd_slope(r);
    if (r.command == "perc")
        return cmd_perc(r);
    if (r.command == "chemdist")
        return cmd_chemdist(r);
    if (r.command == "lc")
        return cmd_lc(r);
    if (r.command == "kacrice" || r.command == "experiment")
        return cmd_experiment(r);
    throw ConfigError("unknown subcommand '" + r.command + "'");
}

void write_manifest(const Run& r, const std::vector<fs::path>& files)
{
    if (to_stdout(r))
        return;
    Json list = Json::array();
    for (const auto& f : files)
        list.push_back(f.filename().string());
    const Json m = {{"tool_version", tool_version},
                    {"subcommand", r.command},
                    {"params", r.params},
                    {"config_path", r.config_path},
                    {"config_hash", hex64(fnv1a(r.params.dump()))},
                    {"seed", r.seed},
                    {"out", r.out},
                    {"format", r.format},
                    {"outputs", list},
                    {"threads", max_threads()},
                    {"timestamp", utc_now()}};
    write_text(fs::path(r.out) / "manifest.json", m.dump(2) + "\n");
}

Run from_manifest(const std::string& path)
{
    Json m;
    try {
        m = Json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest '" + path + "': " + e.what());
    }
    Run r;
    try {
        r.command = m.at("subcommand").get<std::string>();
        r.params = m.at("params");
        r.seed = m.at("seed").get<std::uint64_t>();
        r.out = m.at("out").get<std::string>();
        r.format = m.at("format").get<std::string>();
        r.config_path = m.value("config_path", "");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest '" + path + "': " + e.what());
    }
    if (m.contains("config_hash") && m["config_hash"] != hex64(fnv1a(r.params.dump())))
        throw ConsistencyError("manifest '" + path + "': config hash does not match its params");
    return r;
}

std::uint64_t parse_seed(const std::string& s, const char* what)
{
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used, 0);
        if (used != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(std::string(what) + ": '" + s + "' is not an unsigned 64-bit integer");
    }
}

std::vector<int> parse_ints(const std::string& s, std::size_t n, const char* what)
{
    std::vector<int> out;
    std::stringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ','))
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw ConfigError(std::string(what) + ": '" + s + "' is not a list of integers");
        }
    if (out.size() != n)
        throw ConfigError(std::string(what) + ": expected " + std::to_string(n) + " comma-separated integers");
    return out;
}

int exit_code(const std::exception& e)
{
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const SupportError*>(&e) ||
        dynamic_cast<const OrderError*>(&e))
        return config;
    if (dynamic_cast<const BoundsError*>(&e) || dynamic_cast<const IdError*>(&e))
        return bounds;
    if (dynamic_cast<const FormatError*>(&e))
        return format;
    if (dynamic_cast<const ConsistencyError*>(&e) || dynamic_cast<const ShapeError*>(&e))
        return consistency;
    return other;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Slope-field simulation lab: fields, slope fields, excursion sets and Monte Carlo campaigns"};
    app.require_subcommand(0, 1);
    app.fallthrough();

    std::string config_path, seed_text, out = ".", fmt = "csv", manifest;
    unsigned threads = 0;
    app.add_option("--config", config_path, "JSON config; flags override its keys")->check(CLI::ExistingFile);
    app.add_option("--seed", seed_text, "master seed (fallback: SHADOWLAB_SEED, then 1)");
    app.add_option("--out", out, "output directory, or - for standard output");
    app.add_option("--threads", threads, "worker cap (0 = all cores)");
    app.add_option("--format", fmt, "table format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--manifest", manifest, "rerun the run recorded in this manifest")->check(CLI::ExistingFile);

    // Flags of every subcommand land in one JSON object.
    Json flags = Json::object();
    std::string s_family, s_input, s_field, s_from, s_to, s_rect, s_conn, s_dir, s_name;
    std::vector<double> s_params;
    int s_grid = 0, s_nx = 0, s_ny = 0, s_n = 0, s_margin = -1, s_origin = 0, s_draws = 0, s_levels = 0;
    double s_h = 0, s_trunc = 0, s_level = 0, s_window = 0, s_floor = 0, s_side = 0, s_tol = 0, s_bw = 0, s_box = 0,
           s_kernel_trunc = 0;
    bool s_svg = false;

    auto kernel_opts = [&](CLI::App* c) {
        c->add_option("--kernel", s_family, "kernel family: gaussian, bump or power_tail");
        c->add_option("--params", s_params, "kernel parameters")->delimiter(',');
        c->add_option("--kernel-trunc", s_kernel_trunc, "kernel truncation radius");
        c->add_option("--spacing", s_h, "grid spacing h");
    };
    auto slope_opts = [&](CLI::App* c) {
        c->add_option("--level-floor", s_floor, "lowest level of interest for the ray margin");
        c->add_option("--margin", s_margin, "explicit margin in cells");
    };

    auto* field = app.add_subcommand("field", "synthesize f = q * W with derivatives (SHDW1 snapshot)");
    kernel_opts(field);
    field->add_option("--grid", s_grid, "square grid side in cells");
    field->add_option("--nx", s_nx, "columns");
    field->add_option("--ny", s_ny, "rows");
    field->add_option("--truncation", s_trunc, "truncation radius R for f_R");
    field->add_flag("--svg", s_svg, "also render an SVG heatmap");

    auto* slope = app.add_subcommand("slope", "slope field alpha and argmax T of a field snapshot");
    slope->add_option("--input", s_input, "field snapshot");
    slope->add_option("--window", s_window, "restrict rays to lengths below this");
    slope_opts(slope);
    slope->add_flag("--svg", s_svg, "also render an SVG heatmap");

    auto* perc = app.add_subcommand("perc", "threshold at a level and test crossings");
    perc->add_option("--input", s_input, "slope or field snapshot");
    perc->add_option("--field", s_field, "field snapshot that must share the grid");
    perc->add_option("--level", s_level, "level l of {alpha <= l}");
    perc->add_option("--connectivity", s_conn, "four or eight");
    perc->add_option("--direction", s_dir, "horizontal or vertical");
    perc->add_option("--rect", s_rect, "x0,y0,x1,y1 in cells (default: non-margin window)");
    slope_opts(perc);
    perc->add_flag("--svg", s_svg, "also render the mask");

    auto* chem = app.add_subcommand("chemdist", "chemical distance between two cells");
    chem->add_option("--input", s_input, "slope or field snapshot");
    chem->add_option("--field", s_field, "field snapshot that must share the grid");
    chem->add_option("--level", s_level, "level l of {alpha <= l}");
    chem->add_option("--from", s_from, "x,y");
    chem->add_option("--to", s_to, "x,y");
    chem->add_option("--connectivity", s_conn, "four or eight");
    slope_opts(chem);
    chem->add_flag("--svg", s_svg, "also render the path");

    auto* kr = app.add_subcommand("kacrice", "mean level-set length against its expectation formula");
    kernel_opts(kr);
    kr->add_option("--origin-samples", s_origin, "draws of alpha at a point");
    kr->add_option("--field-draws", s_draws, "field draws for the mean length");
    kr->add_option("--levels", s_levels, "levels across the 5-95% bulk");
    kr->add_option("--bandwidth", s_bw, "KDE bandwidth (default: Silverman)");
    kr->add_option("--box", s_box, "box side");

    auto* lc = app.add_subcommand("lc", "critical level by bisection on square crossings");
    kernel_opts(lc);
    lc->add_option("--side", s_side, "square side");
    lc->add_option("--n-samples", s_n, "samples");
    lc->add_option("--tol", s_tol, "bracket width");
    lc->add_option("--connectivity", s_conn, "four or eight");
    slope_opts(lc);

    auto* exp = app.add_subcommand("experiment", "config-driven campaign");
    exp->add_option("name", s_name, "crossing-decay, chemical-scaling, global-structure, truncation, lipschitz, kac-rice");
    exp->add_option("--n-samples", s_n, "samples per point");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config;
    }

    try {
        if (threads)
            set_max_threads(threads);
        Run r;
        if (!manifest.empty()) {
            r = from_manifest(manifest);
            if (app.count("--out"))
                r.out = out;
        } else {
            auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
            if (!sub)
                throw ConfigError("no subcommand given (see --help)");
            r.command = sub->get_name();
            r.out = out;
            r.format = fmt;
            r.config_path = config_path;
            if (!config_path.empty()) {
                try {
                    r.params = Json::parse(read_text(config_path));
                } catch (const nlohmann::json::exception& e) {
                    throw ConfigError("config '" + config_path + "': " + e.what());
                }
                if (!r.params.is_object())
                    throw ConfigError("config '" + config_path + "': expected a JSON object");
            }
            Json& p = r.params;
            auto given = [&](const char* opt) {
                const auto* o = sub->get_option_no_throw(opt);
                return o && o->count() > 0;
            };
            auto set = [&](const char* opt, const char* key, const Json& v) {
                if (given(opt))
                    p[key] = v;
            };
            if (given("--kernel")) {
                if (!p.contains("kernel") || !p["kernel"].is_object())
                    p["kernel"] = Json::object();
                p["kernel"]["family"] = s_family;
            }
            if (given("--params")) {
                if (!p.contains("kernel") || !p["kernel"].is_object())
                    p["kernel"] = Json::object();
                p["kernel"]["params"] = s_params;
            }
            if (given("--kernel-trunc"))
                p["kernel"]["trunc_radius"] = s_kernel_trunc;
            set("--spacing", "h", s_h);
            if (r.command == "field") {
                if (p.contains("grid") && p["grid"].is_number_integer())
                    p["nx"] = p["ny"] = p["grid"];
                if (p.contains("grid") && p["grid"].is_object()) {
                    for (const char* k : {"nx", "ny", "h"})
                        if (p["grid"].contains(k) && !p.contains(k))
                            p[k] = p["grid"][k];
                }
                p.erase("grid");
                if (given("--grid"))
                    p["nx"] = p["ny"] = s_grid;
                set("--nx", "nx", s_nx);
                set("--ny", "ny", s_ny);
                set("--truncation", "truncation", s_trunc);
                if (!p.contains("h"))
                    p["h"] = 0.25;
            }
            set("--input", "input", s_input);
            set("--field", "field", s_field);
            set("--level", "level", s_level);
            set("--window", "window", s_window);
            set("--level-floor", "level_floor", s_floor);
            set("--margin", "margin", s_margin);
            set("--connectivity", "connectivity", s_conn);
            set("--direction", "direction", s_dir);
            if (s_svg)
                p["svg"] = true;
            if (given("--from")) {
                const auto v = parse_ints(s_from, 2, "from");
                p["from"] = v;
            }
            if (given("--to")) {
                const auto v = parse_ints(s_to, 2, "to");
                p["to"] = v;
            }
            if (given("--rect"))
                p["rect"] = parse_ints(s_rect, 4, "rect");
            set("--side", "side", s_side);
            set("--tol", "tol", s_tol);
            set("--n-samples", "n_samples", s_n);
            if (r.command == "lc") {
                if (!p.contains("h"))
                    p["h"] = 0.25;
                if (!p.contains("side"))
                    p["side"] = 16.0;
                if (!p.contains("n_samples"))
                    p["n_samples"] = 200;
                if (!p.contains("tol"))
                    p["tol"] = 0.01;
            }
            if (r.command == "kacrice") {
                p["experiment"] = "kac-rice";
                if (p.contains("h") && !p.contains("kac_rice_h"))
                    p["kac_rice_h"] = p["h"];
                set("--origin-samples", "origin_samples", s_origin);
                set("--field-draws", "field_draws", s_draws);
                set("--levels", "level_count", s_levels);
                set("--bandwidth", "bandwidth", s_bw);
                set("--box", "kac_rice_box", s_box);
            }
            if (r.command == "experiment") {
                if (given("name"))
                    p["experiment"] = s_name;
                if (!p.contains("experiment"))
                    throw ConfigError("experiment: no name given (positional or config key 'experiment')");
            }
            if ((r.command == "perc" || r.command == "chemdist" || r.command == "slope") && !p.contains("input"))
                throw ConfigError("input: missing (pass --input)");
            if ((r.command == "perc" || r.command == "chemdist") && !p.contains("level"))
                throw ConfigError("level: missing (pass --level)");

            // Seed: flag, then config, then environment.
            if (!seed_text.empty())
                r.seed = parse_seed(seed_text, "--seed");
            else if (p.contains("seed"))
                r.seed = p["seed"].is_string() ? parse_seed(p["seed"].get<std::string>(), "seed")
                                               : p["seed"].get<std::uint64_t>();
            else if (const char* env = std::getenv("SHADOWLAB_SEED"); env && *env)
                r.seed = parse_seed(env, "SHADOWLAB_SEED");
            p["seed"] = r.seed;
            record_input(r, "input");
            record_input(r, "field");
        }
        const auto files = execute(r);
        write_manifest(r, files);
        return ok;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "shadowlab: config: " << e.what() << '\n';
        return config;
    } catch (const std::exception& e) {
        std::cerr << "shadowlab: " << e.what() << '\n';
        return exit_code(e);
    }
}
