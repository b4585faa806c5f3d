#include "shadowlab/excursion.hpp"

#include "shadowlab/field.hpp"
#include "shadowlab/parallel.hpp"
#include "shadowlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <queue>

namespace shadow {

namespace {

constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

int degree(Connectivity c) { return c == Connectivity::four ? 4 : 8; }

void require_inside(const ExcursionMask& mask, const CellRect& rect, const char* what)
{
    const CellRect in = mask.interior();
    if (!rect.valid() || rect.x0 < in.x0 || rect.y0 < in.y0 || rect.x1 > in.x1 || rect.y1 > in.y1)
        throw BoundsError(std::string(what) + ": rectangle leaves the non-margin window");
}

// BFS over cells of rect satisfying `pass`, from the start side to the far side.
bool side_to_side(const CellRect& rect, Direction dir, Connectivity conn, const std::function<bool(int, int)>& pass)
{
    const int w = rect.width(), hgt = rect.height();
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * hgt, 0);
    std::deque<Cell> queue;
    auto push = [&](int x, int y) {
        auto& s = seen[static_cast<std::size_t>(y - rect.y0) * w + (x - rect.x0)];
        if (!s && pass(x, y)) {
            s = 1;
            queue.push_back({x, y});
        }
    };
    if (dir == Direction::horizontal)
        for (int y = rect.y0; y <= rect.y1; ++y)
            push(rect.x0, y);
    else
        for (int x = rect.x0; x <= rect.x1; ++x)
            push(x, rect.y0);
    const int deg = degree(conn);
    while (!queue.empty()) {
        const Cell c = queue.front();
        queue.pop_front();
        if ((dir == Direction::horizontal && c.x == rect.x1) || (dir == Direction::vertical && c.y == rect.y1))
            return true;
        for (int k = 0; k < deg; ++k) {
            const Cell n{c.x + kDx[k], c.y + kDy[k]};
            if (rect.contains(n))
                push(n.x, n.y);
        }
    }
    return false;
}

GridSpec crossing_grid(const CrossingConfig& cfg, int& wcells, int& hcells)
{
    if (!(cfg.h > 0.0) || !(cfg.width > 0.0) || !(cfg.height > 0.0) || !(cfg.lambda > 0.0))
        throw ConfigError("crossing: h, width, height and lambda must be positive");
    wcells = std::max(2, static_cast<int>(std::lround(cfg.lambda * cfg.width / cfg.h)));
    hcells = std::max(2, static_cast<int>(std::lround(cfg.lambda * cfg.height / cfg.h)));
    const int margin = margin_cells(cfg.kernel, cfg.h, cfg.slope);
    return make_grid(cfg.kernel, wcells + margin, hcells, cfg.h);
}

} // namespace

std::string to_string(Connectivity c) { return c == Connectivity::four ? "four" : "eight"; }
std::string to_string(Direction d) { return d == Direction::horizontal ? "horizontal" : "vertical"; }

Connectivity parse_connectivity(const std::string& s)
{
    if (s == "four" || s == "4")
        return Connectivity::four;
    if (s == "eight" || s == "8")
        return Connectivity::eight;
    throw ConfigError("unknown connectivity '" + s + "' (expected four or eight)");
}

Direction parse_direction(const std::string& s)
{
    if (s == "horizontal")
        return Direction::horizontal;
    if (s == "vertical")
        return Direction::vertical;
    throw ConfigError("unknown crossing direction '" + s + "' (expected horizontal or vertical)");
}

int label_components(const MaskGrid& open, Connectivity conn, IntGrid& labels)
{
    const auto ny = static_cast<int>(open.rows()), nx = static_cast<int>(open.cols());
    UnionFind uf(static_cast<std::size_t>(nx) * ny);
    auto id = [nx](int x, int y) { return static_cast<std::size_t>(y) * nx + x; };
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            if (!open(y, x))
                continue;
            // Neighbours already visited in row-major order.
            if (x > 0 && open(y, x - 1))
                uf.unite(id(x, y), id(x - 1, y));
            if (y > 0) {
                if (open(y - 1, x))
                    uf.unite(id(x, y), id(x, y - 1));
                if (conn == Connectivity::eight) {
                    if (x > 0 && open(y - 1, x - 1))
                        uf.unite(id(x, y), id(x - 1, y - 1));
                    if (x + 1 < nx && open(y - 1, x + 1))
                        uf.unite(id(x, y), id(x + 1, y - 1));
                }
            }
        }
    labels = IntGrid::Constant(ny, nx, -1);
    std::vector<int> root_label(static_cast<std::size_t>(nx) * ny, -1);
    int count = 0;
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            if (!open(y, x))
                continue;
            auto& l = root_label[uf.find(id(x, y))];
            if (l < 0)
                l = count++;
            labels(y, x) = l;
        }
    return count;
}

ExcursionMask make_mask(const MaskGrid& open, Connectivity conn, double h, double level, int margin)
{
    ExcursionMask m;
    m.spec.h = h;
    m.spec.nx = static_cast<int>(open.cols());
    m.spec.ny = static_cast<int>(open.rows());
    m.level = level;
    m.margin = std::clamp(margin, 0, m.spec.nx);
    m.open = open;
    m.open.rightCols(m.margin).setZero();
    m.connectivity = conn;
    m.components = label_components(m.open, conn, m.labels);
    return m;
}

ExcursionMask threshold(const SlopeField& sf, double level, Connectivity conn)
{
    MaskGrid open = (sf.alpha <= level).cast<std::uint8_t>();
    ExcursionMask m = make_mask(open, conn, sf.spec.h, level, sf.margin);
    m.spec = sf.spec;
    return m;
}

bool crossing(const ExcursionMask& mask, const CellRect& rect, Direction dir)
{
    require_inside(mask, rect, "crossing");
    return side_to_side(rect, dir, mask.connectivity, [&](int x, int y) { return mask.open(y, x) != 0; });
}

bool closed_crossing(const ExcursionMask& mask, const CellRect& rect, Direction dir)
{
    require_inside(mask, rect, "closed_crossing");
    return side_to_side(rect, dir, dual(mask.connectivity), [&](int x, int y) { return mask.open(y, x) == 0; });
}

double crossing_threshold(const SlopeField& sf, const CellRect& rect, Direction dir, Connectivity conn)
{
    const CellRect in = sf.interior();
    if (!rect.valid() || rect.x0 < in.x0 || rect.y0 < in.y0 || rect.x1 > in.x1 || rect.y1 > in.y1)
        throw BoundsError("crossing_threshold: rectangle leaves the non-margin window");
    const int w = rect.width(), hgt = rect.height();
    const auto n = static_cast<std::size_t>(w) * hgt;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto value = [&](std::size_t i) {
        return sf.alpha(rect.y0 + static_cast<int>(i / w), rect.x0 + static_cast<int>(i % w));
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value(a) < value(b); });

    UnionFind uf(n);
    std::vector<std::uint8_t> added(n, 0), start(n, 0), end(n, 0);
    const int deg = degree(conn);
    for (std::size_t i : order) {
        const int lx = static_cast<int>(i % w), ly = static_cast<int>(i / w);
        added[i] = 1;
        start[i] = dir == Direction::horizontal ? lx == 0 : ly == 0;
        end[i] = dir == Direction::horizontal ? lx == w - 1 : ly == hgt - 1;
        for (int k = 0; k < deg; ++k) {
            const int nx = lx + kDx[k], ny = ly + kDy[k];
            if (nx < 0 || ny < 0 || nx >= w || ny >= hgt)
                continue;
            const auto j = static_cast<std::size_t>(ny) * w + nx;
            if (!added[j])
                continue;
            const auto a = uf.find(i), b = uf.find(j);
            if (a == b)
                continue;
            const std::uint8_t s = start[a] | start[b], e = end[a] | end[b];
            uf.unite(a, b);
            start[uf.find(i)] = s;
            end[uf.find(i)] = e;
        }
        const auto r = uf.find(i);
        if (start[r] && end[r])
            return value(i);
    }
    return std::numeric_limits<double>::infinity();
}

std::optional<double> annulus_loop(const ExcursionMask& mask, const Annulus& a)
{
    if (!(a.r_in > 0 && a.r_in < a.r_out))
        throw ConfigError("annulus: need 0 < r_in < r_out");
    const CellRect box{a.center.x - a.r_out, a.center.y - a.r_out, a.center.x + a.r_out, a.center.y + a.r_out};
    require_inside(mask, box, "annulus_loop");

    const int side = box.width();
    auto ring = [&](int x, int y) { return std::max(std::abs(x - a.center.x), std::abs(y - a.center.y)); };
    auto inside = [&](int x, int y) {
        const int d = ring(x, y);
        return d > a.r_in && d <= a.r_out;
    };
    auto local = [&](int x, int y) { return static_cast<std::size_t>(y - box.y0) * side + (x - box.x0); };

    // Closed cells joining the two boundaries rule out any separating circuit.
    {
        std::vector<std::uint8_t> seen(static_cast<std::size_t>(side) * side, 0);
        std::deque<Cell> queue;
        const int deg = degree(dual(mask.connectivity));
        auto touches_hole = [&](int x, int y) {
            for (int k = 0; k < deg; ++k)
                if (ring(x + kDx[k], y + kDy[k]) <= a.r_in)
                    return true;
            return false;
        };
        for (int y = box.y0; y <= box.y1; ++y)
            for (int x = box.x0; x <= box.x1; ++x)
                if (ring(x, y) == a.r_in + 1 && !mask.open(y, x) && touches_hole(x, y)) {
                    seen[local(x, y)] = 1;
                    queue.push_back({x, y});
                }
        while (!queue.empty()) {
            const Cell c = queue.front();
            queue.pop_front();
            if (ring(c.x, c.y) == a.r_out)
                return std::nullopt;
            for (int k = 0; k < deg; ++k) {
                const int x = c.x + kDx[k], y = c.y + kDy[k];
                if (!inside(x, y) || mask.open(y, x) || seen[local(x, y)])
                    continue;
                seen[local(x, y)] = 1;
                queue.push_back({x, y});
            }
        }
    }

    // Shortest open closed walk crossing the half-line y = cy + 1/2, x > cx an
    // odd number of times: Dijkstra on a two-sheet cover that swaps sheets at
    // each crossing, from (s, 0) to (s, 1) for every s on the cut row.
    const int deg = degree(mask.connectivity);
    const auto nodes = static_cast<std::size_t>(side) * side * 2;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(nodes, inf);
    std::vector<std::size_t> touched;
    double best = inf;
    using Item = std::pair<double, std::size_t>;
    for (int sx = a.center.x + a.r_in + 1; sx <= a.center.x + a.r_out; ++sx) {
        const int sy = a.center.y;
        if (!mask.open(sy, sx))
            continue;
        for (auto t : touched)
            dist[t] = inf;
        touched.clear();
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        const std::size_t src = local(sx, sy) * 2, dst = src + 1;
        dist[src] = 0.0;
        touched.push_back(src);
        heap.push({0.0, src});
        while (!heap.empty()) {
            const auto [d, u] = heap.top();
            heap.pop();
            if (d > dist[u] || d >= best)
                continue;
            if (u == dst) {
                best = d;
                break;
            }
            const std::size_t cell = u / 2;
            const int sheet = static_cast<int>(u % 2);
            const int x = box.x0 + static_cast<int>(cell % side), y = box.y0 + static_cast<int>(cell / side);
            for (int k = 0; k < deg; ++k) {
                const int x2 = x + kDx[k], y2 = y + kDy[k];
                if (!inside(x2, y2) || !mask.open(y2, x2))
                    continue;
                const bool cut = std::min(y, y2) == a.center.y && std::max(y, y2) == a.center.y + 1 &&
                                 x + x2 > 2 * a.center.x;
                const std::size_t v = local(x2, y2) * 2 + static_cast<std::size_t>(cut ? 1 - sheet : sheet);
                const double nd = d + (k < 4 ? 1.0 : std::sqrt(2.0));
                if (nd < dist[v]) {
                    if (dist[v] == inf)
                        touched.push_back(v);
                    dist[v] = nd;
                    heap.push({nd, v});
                }
            }
        }
    }
    if (best == inf)
        return std::nullopt;
    return best * mask.spec.h;
}

std::vector<double> crossing_thresholds(const CrossingConfig& cfg, int n_samples, std::uint64_t seed)
{
    if (n_samples < 1)
        throw ConfigError("crossing: number of samples must be positive");
    int wcells = 0, hcells = 0;
    const GridSpec spec = crossing_grid(cfg, wcells, hcells);
    const FieldSynthesizer synth(cfg.kernel, spec);
    const CellRect rect{0, 0, wcells - 1, hcells - 1};
    std::vector<double> out(static_cast<std::size_t>(n_samples));
    parallel_for(out.size(), [&](std::size_t i) {
        const auto s = split_seed(seed, i);
        const FieldSample fs = synth.synthesize(sample_white_noise(spec, s), s);
        const SlopeField sf = slope_field(fs, cfg.slope);
        out[i] = crossing_threshold(sf, rect, cfg.direction, cfg.connectivity);
    });
    return out;
}

CrossingEstimate estimate_from_thresholds(const std::vector<double>& thresholds, double level, double lambda,
                                          std::uint64_t seed)
{
    CrossingEstimate e;
    e.level = level;
    e.lambda = lambda;
    e.seed = seed;
    e.n = static_cast<std::int64_t>(thresholds.size());
    e.outcomes.reserve(thresholds.size());
    for (double t : thresholds) {
        const bool hit = t <= level;
        e.outcomes.push_back(hit);
        e.successes += hit;
    }
    e.p = e.n ? static_cast<double>(e.successes) / static_cast<double>(e.n) : 0.0;
    e.ci = stats::wilson(e.successes, e.n);
    return e;
}

CrossingEstimate estimate_crossing_probability(const CrossingConfig& cfg, double level, int n_samples,
                                               std::uint64_t seed)
{
    return estimate_from_thresholds(crossing_thresholds(cfg, n_samples, seed), level, cfg.lambda, seed);
}

std::vector<CrossingEstimate> estimate_crossing_levels(const CrossingConfig& cfg, const std::vector<double>& levels,
                                                       int n_samples, std::uint64_t seed)
{
    const auto thr = crossing_thresholds(cfg, n_samples, seed);
    std::vector<CrossingEstimate> out;
    for (double l : levels)
        out.push_back(estimate_from_thresholds(thr, l, cfg.lambda, seed));
    return out;
}

CriticalLevel estimate_critical_level(const CrossingConfig& cfg, double side, int n_samples, double tol,
                                      std::uint64_t seed)
{
    if (!(tol > 0.0))
        throw ConfigError("critical level: tolerance must be positive");
    CrossingConfig c = cfg;
    c.width = c.height = side;
    c.lambda = 1.0;
    c.direction = Direction::horizontal;
    const auto thr = crossing_thresholds(c, n_samples, seed);

    auto probe = [&](double level) {
        const auto e = estimate_from_thresholds(thr, level, 1.0, seed);
        return CriticalProbe{level, e.p, e.ci};
    };
    const auto [mn, mx] = std::minmax_element(thr.begin(), thr.end());
    if (!std::isfinite(*mx))
        throw ConsistencyError("critical level: crossing never occurs on some sample");
    CriticalLevel out;
    out.side = side;
    out.n_samples = n_samples;
    out.lo = *mn - tol;
    out.hi = *mx;
    out.probes.push_back(probe(out.lo));
    out.probes.push_back(probe(out.hi));
    while (out.hi - out.lo > tol) {
        const double mid = 0.5 * (out.lo + out.hi);
        const auto p = probe(mid);
        out.probes.push_back(p);
        (p.p >= 0.5 ? out.hi : out.lo) = mid;
    }
    auto sorted = out.probes;
    std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.level < b.level; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i].p < sorted[i - 1].p)
            out.non_monotone = true;
    out.estimate = 0.5 * (out.lo + out.hi);
    return out;
}

} // namespace shadow
