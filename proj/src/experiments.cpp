#include "shadowlab/experiments.hpp"

#include "shadowlab/field.hpp"
#include "shadowlab/parallel.hpp"
#include "shadowlab/rng.hpp"
#include "shadowlab/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace shadow {

namespace {

// ---- config parsing -----------------------------------------------------------

template <typename T>
T get(const Json& j, const char* key, const T& fallback)
{
    if (!j.contains(key) || j[key].is_null())
        return fallback;
    try {
        return j[key].get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string(key) + ": wrong type");
    }
}

double number(const Json& j, const char* key, double fallback)
{
    if (!j.contains(key) || j[key].is_null())
        return fallback;
    if (!j[key].is_number())
        throw ConfigError(std::string(key) + ": expected a number");
    return j[key].get<double>();
}

std::vector<double> numbers(const Json& j, const char* key, const std::vector<double>& fallback)
{
    if (!j.contains(key))
        return fallback;
    if (j[key].is_number())
        return {j[key].get<double>()};
    if (!j[key].is_array())
        throw ConfigError(std::string(key) + ": expected a list of numbers");
    std::vector<double> out;
    for (const auto& v : j[key]) {
        if (!v.is_number())
            throw ConfigError(std::string(key) + ": expected a list of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

void check_finite(const std::vector<double>& xs, const char* key)
{
    for (double x : xs)
        if (!std::isfinite(x))
            throw ConfigError(std::string(key) + ": values must be finite");
}

// ---- helpers ------------------------------------------------------------------

class Stopwatch {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Independent seed streams of one campaign.
enum Stream : std::uint64_t { critical_stream = 1, sample_stream = 100, origin_stream = 900, bootstrap_stream = 950 };

std::uint64_t stream(const ExperimentConfig& cfg, std::uint64_t tag) { return split_seed(cfg.seed, tag); }

CrossingConfig crossing_config(const ExperimentConfig& cfg)
{
    CrossingConfig c;
    c.kernel = cfg.kernel;
    c.h = cfg.h;
    c.width = cfg.width;
    c.height = cfg.height;
    c.connectivity = cfg.connectivity;
    c.slope = cfg.slope;
    return c;
}

std::vector<double> resolve_levels(const ExperimentConfig& cfg, Json& summary)
{
    if (cfg.level_offsets.empty()) {
        if (cfg.levels.empty())
            throw ConfigError("levels: at least one level is required");
        return cfg.levels;
    }
    const auto crit = estimate_critical_level(crossing_config(cfg), cfg.critical.side, cfg.critical.n_samples,
                                              cfg.critical.tol, stream(cfg, critical_stream));
    summary["critical"] = {{"estimate", crit.estimate},
                           {"lo", crit.lo},
                           {"hi", crit.hi},
                           {"bracket_width", crit.bracket_width()},
                           {"side", crit.side},
                           {"n_samples", crit.n_samples},
                           {"non_monotone", crit.non_monotone}};
    std::vector<double> out;
    for (double o : cfg.level_offsets)
        out.push_back(crit.estimate + o * crit.bracket_width());
    return out;
}

ExperimentResult start(const ExperimentConfig& cfg, std::vector<std::string> columns)
{
    if (cfg.n_samples < 1)
        throw ConfigError("n_samples: must be at least 1");
    ExperimentResult r;
    r.name = cfg.name;
    r.seed = cfg.seed;
    r.config = to_json(cfg);
    r.summary = Json::object();
    r.table.columns = std::move(columns);
    return r;
}

std::vector<double> connected_only(const std::vector<double>& xs)
{
    std::vector<double> out;
    for (double x : xs)
        if (x >= 0)
            out.push_back(x);
    return out;
}

// Grid around the segment from a = (room, room) to b = (room + d, room).
struct PairGrid {
    GridSpec spec;
    Cell a, b;
};

PairGrid pair_grid(const ExperimentConfig& cfg, int d, int min_room)
{
    if (d < 1)
        throw ConfigError("distances: must be positive");
    const int room = std::max({4, min_room, static_cast<int>(std::lround(cfg.room * d))});
    const int margin = margin_cells(cfg.kernel, cfg.h, cfg.slope);
    PairGrid g;
    g.spec = make_grid(cfg.kernel, d + 2 * room + margin, 2 * room + 1, cfg.h);
    g.a = {room, room};
    g.b = {room + d, room};
    return g;
}

double spectral_norm(double a, double b, double c)
{
    // Largest |eigenvalue| of [[a, b], [b, c]].
    const double m = 0.5 * (a + c), r = std::hypot(0.5 * (a - c), b);
    return std::abs(m) + r;
}

} // namespace

ExperimentConfig experiment_from_json(const Json& j)
{
    if (!j.is_object())
        throw ConfigError("config: expected a JSON object");
    ExperimentConfig c;
    c.name = get<std::string>(j, "experiment", get<std::string>(j, "name", c.name));
    if (j.contains("kernel"))
        c.kernel = kernel_from_json(j["kernel"]);
    c.h = number(j, "h", c.h);
    if (j.contains("grid") && j["grid"].is_object())
        c.h = number(j["grid"], "h", c.h);
    if (!(c.h > 0))
        throw ConfigError("h: must be positive");
    if (j.contains("connectivity"))
        c.connectivity = parse_connectivity(get<std::string>(j, "connectivity", "eight"));
    if (j.contains("slope")) {
        const auto& s = j["slope"];
        if (!s.is_object())
            throw ConfigError("slope: expected an object");
        c.slope.level_floor = number(s, "level_floor", c.slope.level_floor);
        c.slope.tail_probability = number(s, "tail_probability", c.slope.tail_probability);
        if (s.contains("margin") && !s["margin"].is_null())
            c.slope.margin = get<int>(s, "margin", 0);
    }
    c.n_samples = get<int>(j, "n_samples", c.n_samples);
    c.seed = get<std::uint64_t>(j, "seed", c.seed);
    c.levels = numbers(j, "levels", c.levels);
    if (j.contains("level") && !j.contains("levels"))
        c.levels = numbers(j, "level", c.levels);
    c.level_offsets = numbers(j, "level_offsets", c.level_offsets);
    check_finite(c.levels, "levels");
    check_finite(c.level_offsets, "level_offsets");
    if (j.contains("critical")) {
        const auto& s = j["critical"];
        c.critical.side = number(s, "side", c.critical.side);
        c.critical.n_samples = get<int>(s, "n_samples", c.critical.n_samples);
        c.critical.tol = number(s, "tol", c.critical.tol);
    }
    c.lambdas = numbers(j, "lambdas", c.lambdas);
    c.width = number(j, "width", c.width);
    c.height = number(j, "height", c.height);
    if (j.contains("distances")) {
        c.distances.clear();
        for (double d : numbers(j, "distances", {}))
            c.distances.push_back(static_cast<int>(d));
    }
    c.constants = numbers(j, "constants", c.constants);
    c.epsilon = number(j, "epsilon", c.epsilon);
    c.room = number(j, "room", c.room);
    c.radii = numbers(j, "radii", c.radii);
    c.tolerance = number(j, "tolerance", c.tolerance);
    c.box = number(j, "box", c.box);
    c.origin_samples = get<int>(j, "origin_samples", c.origin_samples);
    c.field_draws = get<int>(j, "field_draws", c.field_draws);
    c.level_count = get<int>(j, "level_count", c.level_count);
    c.bandwidth = number(j, "bandwidth", c.bandwidth);
    c.kac_rice_box = number(j, "kac_rice_box", c.kac_rice_box);
    c.kac_rice_h = number(j, "kac_rice_h", c.kac_rice_h);
    if (c.n_samples < 1)
        throw ConfigError("n_samples: must be at least 1");
    return c;
}

Json to_json(const ExperimentConfig& c)
{
    Json j = {{"experiment", c.name},
              {"kernel", to_json(c.kernel)},
              {"h", c.h},
              {"connectivity", to_string(c.connectivity)},
              {"slope", {{"level_floor", c.slope.level_floor}, {"tail_probability", c.slope.tail_probability}}},
              {"n_samples", c.n_samples},
              {"seed", c.seed},
              {"levels", c.levels},
              {"level_offsets", c.level_offsets},
              {"critical", {{"side", c.critical.side}, {"n_samples", c.critical.n_samples}, {"tol", c.critical.tol}}},
              {"lambdas", c.lambdas},
              {"width", c.width},
              {"height", c.height},
              {"distances", c.distances},
              {"constants", c.constants},
              {"epsilon", c.epsilon},
              {"room", c.room},
              {"radii", c.radii},
              {"tolerance", c.tolerance},
              {"box", c.box},
              {"origin_samples", c.origin_samples},
              {"field_draws", c.field_draws},
              {"level_count", c.level_count},
              {"bandwidth", c.bandwidth},
              {"kac_rice_box", c.kac_rice_box},
              {"kac_rice_h", c.kac_rice_h}};
    j["slope"]["margin"] = c.slope.margin ? Json(*c.slope.margin) : Json(nullptr);
    return j;
}

bool proportion_greater(std::int64_t k1, std::int64_t n1, std::int64_t k2, std::int64_t n2, double confidence)
{
    if (n1 <= 0 || n2 <= 0)
        return false;
    const double p1 = static_cast<double>(k1) / static_cast<double>(n1);
    const double p2 = static_cast<double>(k2) / static_cast<double>(n2);
    const double pool = static_cast<double>(k1 + k2) / static_cast<double>(n1 + n2);
    const double se = std::sqrt(pool * (1 - pool) * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
    if (!(se > 0))
        return false;
    return (p1 - p2) / se > stats::normal_quantile(2 * confidence - 1);
}

// ---- crossing decay -----------------------------------------------------------

ExperimentResult run_crossing_decay(const ExperimentConfig& cfg)
{
    Stopwatch clock;
    auto r = start(cfg, {"level", "lambda", "n", "successes", "p", "ci_lo", "ci_hi", "one_minus_p", "seed"});
    const auto levels = resolve_levels(cfg, r.summary);
    if (cfg.lambdas.empty())
        throw ConfigError("lambdas: at least one scale is required");
    const std::uint64_t seed = stream(cfg, sample_stream);
    // Thresholds per lambda; every level reads the same samples.
    std::vector<std::vector<double>> thr;
    for (double lambda : cfg.lambdas) {
        auto c = crossing_config(cfg);
        c.lambda = lambda;
        thr.push_back(crossing_thresholds(c, cfg.n_samples, seed));
    }
    Json fits = Json::array();
    for (double level : levels) {
        std::vector<double> xs, ys;
        std::vector<CrossingEstimate> est;
        for (std::size_t k = 0; k < cfg.lambdas.size(); ++k) {
            const auto e = estimate_from_thresholds(thr[k], level, cfg.lambdas[k], seed);
            r.table.add({level, e.lambda, e.n, e.successes, e.p, e.ci.lo, e.ci.hi, 1 - e.p, seed});
            if (e.p < 1) {
                xs.push_back(e.lambda);
                ys.push_back(std::log(1 - e.p));
            }
            est.push_back(e);
        }
        bool non_increasing = true;
        for (std::size_t k = 1; k < est.size(); ++k)
            if (1 - est[k].ci.hi > 1 - est[k - 1].ci.lo)
                non_increasing = false;
        Json f = {{"level", level}, {"non_increasing_within_ci", non_increasing}, {"points", xs.size()}};
        if (xs.size() >= 3) {
            const auto fit = stats::linear_fit(xs, ys);
            const auto ci = fit.slope_ci();
            f["slope"] = fit.slope;
            f["slope_ci"] = {ci.lo, ci.hi};
            f["negative_at_95"] = ci.hi < 0;
        }
        fits.push_back(f);
    }
    r.summary["levels"] = fits;
    r.wall_seconds = clock.seconds();
    return r;
}

// ---- chemical scaling -----------------------------------------------------------

ExperimentResult run_chemical_scaling(const ExperimentConfig& cfg)
{
    Stopwatch clock;
    auto r = start(cfg, {"level", "distance_cells", "distance", "C", "n", "connected", "p_connected", "exceed",
                         "p_exceed", "ci_lo", "ci_hi", "ratio_median", "ratio_p99", "seed"});
    auto levels = resolve_levels(cfg, r.summary);
    std::sort(levels.begin(), levels.end());
    const std::size_t nd = cfg.distances.size(), nl = levels.size();
    if (nd == 0)
        throw ConfigError("distances: at least one distance is required");
    const auto n = static_cast<std::size_t>(cfg.n_samples);

    // ratio[l][d][i] = d_chem / |z|, or -1 when 0 and z are not connected.
    std::vector<std::vector<std::vector<double>>> ratio(nl, std::vector<std::vector<double>>(nd));
    std::vector<std::uint64_t> seeds(nd);
    for (std::size_t j = 0; j < nd; ++j) {
        const int d = cfg.distances[j];
        const PairGrid g = pair_grid(cfg, d, 0);
        const FieldSynthesizer synth(cfg.kernel, g.spec);
        seeds[j] = stream(cfg, sample_stream + j);
        for (auto& l : ratio)
            l[j].assign(n, -1.0);
        parallel_for(n, [&](std::size_t i) {
            const SlopeField sf = slope_field(synth.sample(split_seed(seeds[j], i)), cfg.slope);
            for (std::size_t k = 0; k < nl; ++k) {
                const ExcursionMask m = threshold(sf, levels[k], cfg.connectivity);
                const int la = m.labels(g.a.y, g.a.x);
                if (la >= 0 && la == m.labels(g.b.y, g.b.x))
                    ratio[k][j][i] = chemical_distance(m, g.a, g.b).length / (d * cfg.h);
            }
        });
    }

    Json per_level = Json::array();
    std::vector<double> medians;
    for (std::size_t k = 0; k < nl; ++k) {
        std::vector<double> pooled;
        for (const auto& v : ratio[k])
            for (double x : connected_only(v))
                pooled.push_back(x);
        const double median = stats::quantile(pooled, 0.5);
        medians.push_back(median);
        auto cs = cfg.constants;
        const double c2 = 2 * median;
        if (std::isfinite(c2))
            cs.push_back(c2);
        std::vector<double> p99s;
        std::vector<std::int64_t> exceed2(nd, 0), conn(nd, 0);
        double min_ratio = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < nd; ++j) {
            const auto c = connected_only(ratio[k][j]);
            conn[j] = static_cast<std::int64_t>(c.size());
            const double med = stats::quantile(c, 0.5), p99 = stats::quantile(c, 0.99);
            p99s.push_back(p99);
            for (double x : c)
                min_ratio = std::min(min_ratio, x);
            const int d = cfg.distances[j];
            for (double C : cs) {
                const auto e = static_cast<std::int64_t>(std::count_if(c.begin(), c.end(), [&](double x) { return x >= C; }));
                const auto ci = stats::wilson(e, cfg.n_samples);
                r.table.add({levels[k], d, d * cfg.h, C, cfg.n_samples, conn[j],
                             static_cast<double>(conn[j]) / cfg.n_samples, e,
                             static_cast<double>(e) / cfg.n_samples, ci.lo, ci.hi, med, p99, seeds[j]});
                if (C == c2)
                    exceed2[j] = e;
            }
        }
        bool decreasing = nd > 1;
        for (std::size_t j = 1; j < nd; ++j)
            decreasing = decreasing && proportion_greater(exceed2[j - 1], cfg.n_samples, exceed2[j], cfg.n_samples);
        const auto [lo, hi] = std::minmax_element(p99s.begin(), p99s.end());
        per_level.push_back({{"level", levels[k]},
                             {"median_ratio", median},
                             {"twice_median", c2},
                             {"p99_by_distance", p99s},
                             {"p99_variation", *hi / *lo - 1},
                             {"c_star", p99s.back()},
                             {"exceed_twice_median", exceed2},
                             {"exceed_strictly_decreasing_95", decreasing},
                             {"min_ratio", min_ratio}});
    }
    bool median_monotone = true;
    for (std::size_t k = 1; k < medians.size(); ++k)
        if (medians[k] > medians[k - 1])
            median_monotone = false;
    r.summary["levels"] = per_level;
    r.summary["median_non_increasing_in_level"] = median_monotone;
    r.wall_seconds = clock.seconds();
    return r;
}

// ---- global structure -------------------------------------------------------------

ExperimentResult run_global_structure(const ExperimentConfig& cfg)
{
    Stopwatch clock;
    auto r = start(cfg, {"level", "distance_cells", "distance", "C", "n", "success", "p_success", "good", "p_good",
                         "ci_lo", "ci_hi", "ratio_median", "ratio_iqr", "seed"});
    auto levels = resolve_levels(cfg, r.summary);
    std::sort(levels.begin(), levels.end());
    const std::size_t nd = cfg.distances.size(), nl = levels.size();
    if (nd == 0)
        throw ConfigError("distances: at least one distance is required");
    const auto n = static_cast<std::size_t>(cfg.n_samples);
    std::vector<std::vector<std::vector<double>>> ratio(nl, std::vector<std::vector<double>>(nd));
    Json per_distance = Json::array();
    for (std::size_t j = 0; j < nd; ++j) {
        const int d = cfg.distances[j];
        const double radius = std::pow(d * cfg.h, cfg.epsilon);
        const int rc = static_cast<int>(std::floor(radius / cfg.h));
        const PairGrid g = pair_grid(cfg, d, rc + 1);
        std::vector<Cell> ball_a, ball_b;
        for (int dy = -rc; dy <= rc; ++dy)
            for (int dx = -rc; dx <= rc; ++dx)
                if (dx * dx + dy * dy <= rc * rc) {
                    ball_a.push_back({g.a.x + dx, g.a.y + dy});
                    ball_b.push_back({g.b.x + dx, g.b.y + dy});
                }
        const FieldSynthesizer synth(cfg.kernel, g.spec);
        const std::uint64_t seed = stream(cfg, sample_stream + j);
        for (auto& l : ratio)
            l[j].assign(n, -1.0);
        parallel_for(n, [&](std::size_t i) {
            const SlopeField sf = slope_field(synth.sample(split_seed(seed, i)), cfg.slope);
            for (std::size_t k = 0; k < nl; ++k) {
                const ExcursionMask m = threshold(sf, levels[k], cfg.connectivity);
                std::vector<Cell> src;
                for (const Cell& c : ball_a)
                    if (m.is_open(c))
                        src.push_back(c);
                if (src.empty())
                    continue;
                const Grid dist = chemical_distances(m, src);
                double best = std::numeric_limits<double>::infinity();
                for (const Cell& c : ball_b)
                    best = std::min(best, dist(c.y, c.x));
                if (std::isfinite(best))
                    ratio[k][j][i] = best / (d * cfg.h);
            }
        });
        Json iqrs = Json::array();
        for (std::size_t k = 0; k < nl; ++k) {
            const auto c = connected_only(ratio[k][j]);
            const double med = stats::quantile(c, 0.5);
            const double iqr = stats::quantile(c, 0.75) - stats::quantile(c, 0.25);
            iqrs.push_back(iqr);
            for (double C : cfg.constants) {
                const auto e = static_cast<std::int64_t>(std::count_if(c.begin(), c.end(), [&](double x) { return x <= C; }));
                const auto ci = stats::wilson(e, cfg.n_samples);
                r.table.add({levels[k], d, d * cfg.h, C, cfg.n_samples, c.size(),
                             static_cast<double>(c.size()) / cfg.n_samples, e, static_cast<double>(e) / cfg.n_samples,
                             ci.lo, ci.hi, med, iqr, seed});
            }
        }
        per_distance.push_back({{"distance_cells", d}, {"ball_radius", radius}, {"ratio_iqr_by_level", iqrs}});
    }
    // Coupled levels: success can only grow with the level on every sample.
    std::int64_t violations = 0;
    for (std::size_t k = 1; k < nl; ++k)
        for (std::size_t j = 0; j < nd; ++j)
            for (std::size_t i = 0; i < n; ++i)
                violations += ratio[k - 1][j][i] >= 0 && ratio[k][j][i] < 0;
    r.summary["distances"] = per_distance;
    r.summary["success_monotonicity_violations"] = violations;
    r.wall_seconds = clock.seconds();
    return r;
}

// ---- truncation ---------------------------------------------------------------------

ExperimentResult run_truncation_study(const ExperimentConfig& cfg)
{
    Stopwatch clock;
    auto r = start(cfg, {"R", "n", "exceed", "p", "ci_lo", "ci_hi", "mean_sup", "max_sup", "max_x", "max_y",
                         "max_sample", "seed"});
    auto radii = cfg.radii;
    if (radii.empty() || !std::is_sorted(radii.begin(), radii.end()))
        throw ConfigError("radii: expected an ascending non-empty list");
    const int b = std::max(1, static_cast<int>(std::lround(cfg.box / cfg.h))) + 1;
    const int margin = margin_cells(cfg.kernel, cfg.h, cfg.slope);
    const int reach = std::max(margin, static_cast<int>(std::ceil(radii.back() / cfg.h)) + 1);
    const GridSpec spec = make_grid(cfg.kernel, b + reach, b, cfg.h);
    const std::uint64_t seed = stream(cfg, sample_stream);
    const auto n = static_cast<std::size_t>(cfg.n_samples);
    const std::size_t nr = radii.size();
    struct Sup {
        double value = 0.0;
        int x = 0, y = 0;
    };
    std::vector<std::vector<Sup>> sup(nr, std::vector<Sup>(n));
    parallel_for(n, [&](std::size_t i) {
        const auto s = split_seed(seed, i);
        const Grid noise = sample_white_noise(spec, s);
        const SlopeField alpha = slope_field(convolve_field(noise, cfg.kernel, spec, s), cfg.slope);
        for (std::size_t k = 0; k < nr; ++k) {
            const SlopeField ar = truncated_slope_field(truncated_field(noise, cfg.kernel, radii[k], spec, s), cfg.slope);
            Sup best;
            for (int y = 0; y < b; ++y)
                for (int x = 0; x < b; ++x) {
                    const double v = std::abs(alpha.alpha(y, x) - ar.alpha(y, x));
                    if (v > best.value)
                        best = {v, x, y};
                }
            sup[k][i] = best;
        }
    });
    std::vector<std::vector<double>> ind(nr, std::vector<double>(n));
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < nr; ++k) {
        std::int64_t e = 0;
        double total = 0.0;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < n; ++i) {
            ind[k][i] = sup[k][i].value >= cfg.tolerance;
            e += ind[k][i] > 0;
            total += sup[k][i].value;
            if (sup[k][i].value > sup[k][arg].value)
                arg = i;
        }
        const auto ci = stats::wilson(e, cfg.n_samples);
        const double p = static_cast<double>(e) / cfg.n_samples;
        r.table.add({radii[k], cfg.n_samples, e, p, ci.lo, ci.hi, total / cfg.n_samples, sup[k][arg].value,
                     sup[k][arg].x, sup[k][arg].y, arg, seed});
        if (e > 0) {
            xs.push_back(radii[k]);
            ys.push_back(std::log(p));
        }
    }
    Json pairs = Json::array();
    bool strictly = nr > 1;
    for (std::size_t k = 1; k < nr; ++k) {
        const auto d = stats::paired_difference(ind[k - 1], ind[k]);
        const bool dec = d.ci.lo > 0;
        strictly = strictly && dec;
        pairs.push_back({{"R_from", radii[k - 1]}, {"R_to", radii[k]}, {"drop", d.mean}, {"ci", {d.ci.lo, d.ci.hi}},
                         {"decreasing", dec}});
    }
    r.summary["pairs"] = pairs;
    r.summary["strictly_decreasing"] = strictly;
    r.summary["box_cells"] = b;
    if (xs.size() >= 2) {
        const auto fit = stats::linear_fit(xs, ys);
        r.summary["log_p_slope"] = fit.slope;
    }
    r.wall_seconds = clock.seconds();
    return r;
}

// ---- Lipschitz probe ------------------------------------------------------------------

ExperimentResult run_lipschitz_probe(const ExperimentConfig& cfg)
{
    Stopwatch clock;
    auto r = start(cfg, {"sample", "lipschitz", "hessian_sup", "ratio", "t_max", "seed"});
    const int b = std::max(1, static_cast<int>(std::lround(cfg.box / cfg.h))) + 1;
    const int margin = margin_cells(cfg.kernel, cfg.h, cfg.slope);
    const GridSpec spec = make_grid(cfg.kernel, b + margin + 1, b, cfg.h);
    const FieldSynthesizer synth(cfg.kernel, spec);
    const std::uint64_t seed = stream(cfg, sample_stream);
    const auto n = static_cast<std::size_t>(cfg.n_samples);
    std::vector<std::array<double, 4>> out(n);
    parallel_for(n, [&](std::size_t i) {
        const FieldSample fs = synth.sample(split_seed(seed, i));
        const SlopeField sf = slope_field(fs, cfg.slope);
        double lip = 0.0, tmax = 0.0;
        for (int y = 0; y < b; ++y)
            for (int x = 0; x < b; ++x) {
                tmax = std::max(tmax, sf.argmax_t(y, x));
                if (x + 1 < b)
                    lip = std::max(lip, std::abs(sf.alpha(y, x + 1) - sf.alpha(y, x)) / cfg.h);
                if (y + 1 < b)
                    lip = std::max(lip, std::abs(sf.alpha(y + 1, x) - sf.alpha(y, x)) / cfg.h);
            }
        // Rays from the box reach x + T; the bound uses the strip they sweep.
        const int xend = std::min(spec.nx - 1, b - 1 + static_cast<int>(std::lround(tmax / cfg.h)));
        double m = 0.0;
        for (int y = 0; y < b; ++y)
            for (int x = 0; x <= xend; ++x)
                m = std::max(m, spectral_norm(fs.d2f11(y, x), fs.d2f12(y, x), fs.d2f22(y, x)));
        out[i] = {lip, m, m > 0 ? lip / m : std::numeric_limits<double>::infinity(), tmax};
    });
    std::int64_t within = 0, finite = 0;
    for (std::size_t i = 0; i < n; ++i) {
        r.table.add({i, out[i][0], out[i][1], out[i][2], out[i][3], seed});
        within += out[i][2] <= 1.0;
        finite += std::isfinite(out[i][0]);
    }
    r.summary["fraction_within_bound"] = static_cast<double>(within) / cfg.n_samples;
    r.summary["all_finite"] = finite == cfg.n_samples;
    r.wall_seconds = clock.seconds();
    return r;
}

// ---- Kac-Rice ---------------------------------------------------------------------------

ExperimentResult run_kac_rice_sweep(const ExperimentConfig& cfg)
{
    Stopwatch clock;
    auto r = start(cfg, {"level", "lhs", "lhs_se", "lhs_ci_lo", "lhs_ci_hi", "rhs", "rhs_ci_lo", "rhs_ci_hi",
                         "density", "conditional_mean", "agree", "seed"});
    if (cfg.origin_samples < 2 || cfg.field_draws < 2 || cfg.level_count < 1)
        throw ConfigError("kac-rice: need origin_samples >= 2, field_draws >= 2, level_count >= 1");
    const OriginConfig oc{cfg.kernel, cfg.kac_rice_h, cfg.slope};
    const std::uint64_t seed = stream(cfg, origin_stream);
    const auto samples = sample_alpha_at_origin(oc, cfg.origin_samples, seed);
    const double lo = stats::quantile(samples.alpha, 0.05), hi = stats::quantile(samples.alpha, 0.95);
    std::vector<double> levels;
    for (int k = 0; k < cfg.level_count; ++k)
        levels.push_back(lo + (hi - lo) * (k + 0.5) / cfg.level_count);
    const auto draws = level_length_draws(oc, cfg.kac_rice_box, levels, cfg.field_draws, stream(cfg, sample_stream));
    const int cells = std::max(1, static_cast<int>(std::lround(cfg.kac_rice_box / cfg.kac_rice_h)));
    const double vol = std::pow(cells * cfg.kac_rice_h, 2);
    KacRiceOptions opts;
    opts.bandwidth = cfg.bandwidth;
    opts.seed = stream(cfg, bootstrap_stream);
    const auto rows = kac_rice_compare(samples, levels, draws, vol, opts);
    int agree = 0;
    for (const auto& row : rows) {
        r.table.add({row.level, row.lhs, row.lhs_se, row.lhs_ci.lo, row.lhs_ci.hi, row.rhs, row.rhs_ci.lo,
                     row.rhs_ci.hi, row.density, row.conditional_mean, row.agree ? 1 : 0, seed});
        agree += row.agree;
    }
    r.summary["agree"] = agree;
    r.summary["levels"] = rows.size();
    r.summary["agree_fraction"] = static_cast<double>(agree) / static_cast<double>(rows.size());
    r.summary["bulk"] = {lo, hi};
    r.summary["bandwidth"] = cfg.bandwidth > 0 ? cfg.bandwidth : silverman_bandwidth(samples.alpha);
    r.summary["volume"] = vol;
    r.wall_seconds = clock.seconds();
    return r;
}

// ---- dispatch and output -----------------------------------------------------------------

const std::vector<std::string>& experiment_names()
{
    static const std::vector<std::string> names{"crossing-decay", "chemical-scaling", "global-structure",
                                                "truncation",     "lipschitz",        "kac-rice"};
    return names;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg)
{
    if (cfg.name == "crossing-decay")
        return run_crossing_decay(cfg);
    if (cfg.name == "chemical-scaling")
        return run_chemical_scaling(cfg);
    if (cfg.name == "global-structure")
        return run_global_structure(cfg);
    if (cfg.name == "truncation")
        return run_truncation_study(cfg);
    if (cfg.name == "lipschitz")
        return run_lipschitz_probe(cfg);
    if (cfg.name == "kac-rice")
        return run_kac_rice_sweep(cfg);
    std::string known;
    for (const auto& n : experiment_names())
        known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("experiment: unknown name '" + cfg.name + "' (known: " + known + ")");
}

std::vector<std::filesystem::path> write_result(const ExperimentResult& r, const std::filesystem::path& dir,
                                                const std::string& format)
{
    if (format != "csv" && format != "json")
        throw ConfigError("format: expected csv or json");
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> out;
    const auto table = dir / (r.name + "." + format);
    if (format == "csv") {
        std::ofstream f(table, std::ios::binary);
        if (!f)
            throw Error("cannot open '" + table.string() + "' for writing");
        write_csv(f, r.table);
    } else {
        write_text(table, to_json(r.table).dump(2) + "\n");
    }
    out.push_back(table);
    const Json meta = {{"experiment", r.name},   {"tool_version", tool_version}, {"seed", r.seed},
                       {"config", r.config},     {"summary", r.summary},         {"columns", r.table.columns},
                       {"rows", r.table.rows.size()}};
    const auto mp = dir / (r.name + ".meta.json");
    write_text(mp, meta.dump(2) + "\n");
    out.push_back(mp);
    return out;
}

} // namespace shadow
