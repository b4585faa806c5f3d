#include "shadowlab/geometry.hpp"

#include "shadowlab/parallel.hpp"
#include "shadowlab/rng.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <numbers>
#include <queue>

namespace shadow {

namespace {

constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};
const double kDiag = std::sqrt(2.0);
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_interior(const ExcursionMask& mask, Cell c, const char* what)
{
    if (!mask.interior().contains(c))
        throw BoundsError(std::string(what) + ": cell (" + std::to_string(c.x) + ", " + std::to_string(c.y) +
                          ") outside the non-margin window");
}

// Dijkstra over the open cells of a mask, in cell units. Reusable: only the
// entries touched by the previous run are reset.
class Dijkstra {
public:
    explicit Dijkstra(const ExcursionMask& mask)
        : mask_(mask), nx_(mask.spec.nx), ny_(mask.spec.ny),
          dist_(static_cast<std::size_t>(nx_) * ny_, kInf), pred_(dist_.size(), -1)
    {
    }

    // Runs from `sources`; stops once `target` (if >= 0) is settled.
    void run(const std::vector<std::size_t>& sources, std::ptrdiff_t target = -1)
    {
        for (auto i : touched_) {
            dist_[i] = kInf;
            pred_[i] = -1;
        }
        touched_.clear();
        using Item = std::pair<double, std::size_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        for (auto s : sources) {
            if (!open(s) || dist_[s] == 0.0)
                continue;
            dist_[s] = 0.0;
            touched_.push_back(s);
            heap.push({0.0, s});
        }
        const int deg = mask_.connectivity == Connectivity::four ? 4 : 8;
        while (!heap.empty()) {
            const auto [d, u] = heap.top();
            heap.pop();
            if (d > dist_[u])
                continue;
            if (static_cast<std::ptrdiff_t>(u) == target)
                return;
            const int x = static_cast<int>(u % nx_), y = static_cast<int>(u / nx_);
            for (int k = 0; k < deg; ++k) {
                const int x2 = x + kDx[k], y2 = y + kDy[k];
                if (x2 < 0 || y2 < 0 || x2 >= nx_ || y2 >= ny_)
                    continue;
                const auto v = static_cast<std::size_t>(y2) * nx_ + x2;
                if (!open(v))
                    continue;
                const double nd = d + (k < 4 ? 1.0 : kDiag);
                if (nd < dist_[v]) {
                    if (dist_[v] == kInf)
                        touched_.push_back(v);
                    dist_[v] = nd;
                    pred_[v] = static_cast<std::ptrdiff_t>(u);
                    heap.push({nd, v});
                }
            }
        }
    }

    double dist(std::size_t i) const { return dist_[i]; }
    std::ptrdiff_t pred(std::size_t i) const { return pred_[i]; }
    std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y) * nx_ + c.x; }
    Cell cell(std::size_t i) const { return {static_cast<int>(i % nx_), static_cast<int>(i / nx_)}; }

private:
    bool open(std::size_t i) const { return mask_.open.data()[i] != 0; }

    const ExcursionMask& mask_;
    int nx_, ny_;
    std::vector<double> dist_;
    std::vector<std::ptrdiff_t> pred_;
    std::vector<std::size_t> touched_;
};

// Largest distance between members of `cells`, distances in the whole mask.
Diameter set_diameter(const ExcursionMask& mask, const std::vector<std::size_t>& cells, int exact_cutoff,
                      int sweeps)
{
    Diameter best;
    if (cells.empty())
        return best;
    Dijkstra dj(mask);
    best.a = best.b = dj.cell(cells.front());
    // Farthest member from `from`; ties go to the geometrically farther cell.
    auto farthest = [&](std::size_t from) {
        dj.run({from});
        const Cell c0 = dj.cell(from);
        std::size_t arg = from;
        double far = 0.0, euclid = 0.0;
        for (auto c : cells) {
            const double d = dj.dist(c);
            if (!std::isfinite(d) || d < far)
                continue;
            const Cell p = dj.cell(c);
            const double e = std::hypot(p.x - c0.x, p.y - c0.y);
            if (d > far || e > euclid) {
                far = d;
                euclid = e;
                arg = c;
            }
        }
        return std::make_pair(far, arg);
    };
    auto consider = [&](double far, std::size_t from, std::size_t to) {
        if (far > best.value) {
            best.value = far;
            best.a = dj.cell(from);
            best.b = dj.cell(to);
        }
    };
    if (static_cast<int>(cells.size()) <= exact_cutoff) {
        for (auto s : cells) {
            const auto [far, arg] = farthest(s);
            consider(far, s, arg);
        }
    } else {
        // Farthest-point iterations from the extreme cells in the four axis
        // directions.
        best.exact = false;
        std::array<std::size_t, 4> starts;
        starts.fill(cells.front());
        for (auto c : cells) {
            const Cell p = dj.cell(c), l = dj.cell(starts[0]), r = dj.cell(starts[1]), b = dj.cell(starts[2]),
                       t = dj.cell(starts[3]);
            if (p.x < l.x)
                starts[0] = c;
            if (p.x > r.x)
                starts[1] = c;
            if (p.y < b.y)
                starts[2] = c;
            if (p.y > t.y)
                starts[3] = c;
        }
        for (std::size_t from : starts)
            for (int i = 0; i < sweeps; ++i) {
                const auto [far, arg] = farthest(from);
                consider(far, from, arg);
                from = arg;
            }
    }
    best.value *= mask.spec.h;
    return best;
}

std::vector<std::size_t> component_cells(const ExcursionMask& mask, int component)
{
    if (component < 0 || component >= mask.components)
        throw IdError("unknown component id " + std::to_string(component) + " (mask has " +
                      std::to_string(mask.components) + ")");
    std::vector<std::size_t> cells;
    const auto* lab = mask.labels.data();
    for (Eigen::Index i = 0; i < mask.labels.size(); ++i)
        if (lab[i] == component)
            cells.push_back(static_cast<std::size_t>(i));
    return cells;
}

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi); }

} // namespace

PathResult chemical_distance(const ExcursionMask& mask, Cell a, Cell b)
{
    require_interior(mask, a, "chemical_distance");
    require_interior(mask, b, "chemical_distance");
    PathResult r;
    if (!mask.open(a.y, a.x) || !mask.open(b.y, b.x))
        return r;
    Dijkstra dj(mask);
    const auto ia = dj.index(a), ib = dj.index(b);
    dj.run({ia}, static_cast<std::ptrdiff_t>(ib));
    if (!std::isfinite(dj.dist(ib)))
        return r;
    r.found = true;
    r.length = dj.dist(ib) * mask.spec.h;
    for (auto i = static_cast<std::ptrdiff_t>(ib); i >= 0; i = dj.pred(static_cast<std::size_t>(i)))
        r.cells.push_back(dj.cell(static_cast<std::size_t>(i)));
    std::reverse(r.cells.begin(), r.cells.end());
    return r;
}

Grid chemical_distances(const ExcursionMask& mask, const std::vector<Cell>& sources)
{
    Dijkstra dj(mask);
    std::vector<std::size_t> src;
    for (const Cell& c : sources) {
        if (!mask.spec.in_window(c))
            throw BoundsError("chemical_distances: source outside the window");
        src.push_back(dj.index(c));
    }
    dj.run(src);
    Grid out(mask.spec.ny, mask.spec.nx);
    for (Eigen::Index i = 0; i < out.size(); ++i)
        out.data()[i] = dj.dist(static_cast<std::size_t>(i)) * mask.spec.h;
    return out;
}

Diameter chemical_diameter(const ExcursionMask& mask, int component, int exact_cutoff)
{
    return set_diameter(mask, component_cells(mask, component), exact_cutoff, 4);
}

Diameter double_sweep_diameter(const ExcursionMask& mask, int component, int sweeps)
{
    auto d = set_diameter(mask, component_cells(mask, component), 0, sweeps);
    d.exact = false;
    return d;
}

ChemicalSum s_chem(const ExcursionMask& mask, const CellRect& box, int exact_cutoff)
{
    const CellRect w = mask.spec.window();
    if (!box.valid() || box.x0 < 0 || box.y0 < 0 || box.x1 > w.x1 || box.y1 > w.y1)
        throw BoundsError("s_chem: box outside the window");
    MaskGrid inner = MaskGrid::Zero(mask.spec.ny, mask.spec.nx);
    inner.block(box.y0, box.x0, box.height(), box.width()) =
        mask.open.block(box.y0, box.x0, box.height(), box.width());
    IntGrid labels;
    const int n = label_components(inner, mask.connectivity, labels);
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < labels.size(); ++i)
        if (labels.data()[i] >= 0)
            members[static_cast<std::size_t>(labels.data()[i])].push_back(static_cast<std::size_t>(i));
    ChemicalSum out;
    out.components = n;
    for (const auto& cells : members) {
        const auto d = set_diameter(mask, cells, exact_cutoff, 4);
        out.total += d.value;
        out.exact = out.exact && d.exact;
    }
    return out;
}

CoareaResult coarea_check(const Grid& alpha, const Grid& grad_norm, double h, const CellRect& box,
                          const TestFunction& fn, const LevelGrid& levels)
{
    detail::check_box(alpha, box);
    if (grad_norm.rows() != alpha.rows() || grad_norm.cols() != alpha.cols())
        throw ShapeError("coarea: gradient grid does not match alpha");
    if (levels.count < 1 || !(levels.hi > levels.lo))
        throw ConfigError("coarea: level grid needs count >= 1 and hi > lo");
    CoareaResult r;
    for (int y = box.y0; y < box.y1; ++y)
        for (int x = box.x0; x < box.x1; ++x) {
            const double a = 0.25 * (alpha(y, x) + alpha(y, x + 1) + alpha(y + 1, x) + alpha(y + 1, x + 1));
            const double w = fn(a);
            if (w == 0.0)
                continue;
            const double g =
                0.25 * (grad_norm(y, x) + grad_norm(y, x + 1) + grad_norm(y + 1, x) + grad_norm(y + 1, x + 1));
            r.lhs += w * g * h * h;
        }
    for (int k = 0; k < levels.count; ++k) {
        const double u = levels.level(k);
        const double w = fn(u);
        if (w == 0.0)
            continue;
        r.rhs += w * level_set_length(alpha, u, box, h).length * levels.step();
    }
    const double scale = std::max(std::abs(r.lhs), std::abs(r.rhs));
    r.rel_err = scale > 0 ? std::abs(r.lhs - r.rhs) / scale : 0.0;
    return r;
}

CoareaResult coarea_check(const SlopeField& sf, const FieldSample& fs, const CellRect& box, const TestFunction& fn,
                          const LevelGrid& levels, const CoareaOptions& opts)
{
    const CellRect in = sf.interior();
    if (!box.valid() || box.x0 < in.x0 || box.y0 < in.y0 || box.x1 > in.x1 || box.y1 > in.y1)
        throw BoundsError("coarea_check: box leaves the non-margin window");
    Grid norm = Grid::Zero(sf.spec.ny, sf.spec.nx);
    const double h = sf.spec.h;
    for (int y = box.y0; y <= box.y1; ++y)
        for (int x = box.x0; x <= box.x1; ++x) {
            const Cell c{x, y};
            if (opts.tie_gap > 0 && argmax_gap(fs, c) < opts.tie_gap) {
                const int xl = std::max(x - 1, 0), xr = std::min(x + 1, sf.spec.nx - 1);
                const int yl = std::max(y - 1, 0), yr = std::min(y + 1, sf.spec.ny - 1);
                const double gx = (sf.alpha(y, xr) - sf.alpha(y, xl)) / ((xr - xl) * h);
                const double gy = (sf.alpha(yr, x) - sf.alpha(yl, x)) / ((yr - yl) * h);
                norm(y, x) = std::hypot(gx, gy);
            } else {
                norm(y, x) = slope_gradient(fs, sf, c).norm();
            }
        }
    return coarea_check(sf.alpha, norm, h, box, fn, levels);
}

std::vector<double> OriginSamples::gradient_norm() const
{
    std::vector<double> out;
    out.reserve(gradient.size());
    for (const auto& g : gradient)
        out.push_back(g.norm());
    return out;
}

OriginSamples sample_alpha_at_origin(const OriginConfig& cfg, int n_samples, std::uint64_t seed)
{
    if (n_samples < 1)
        throw ConfigError("sample_alpha_at_origin: number of samples must be positive");
    const int margin = margin_cells(cfg.kernel, cfg.h, cfg.slope);
    const GridSpec spec = make_grid(cfg.kernel, std::max(2, margin + 1), 1, cfg.h);
    const FieldSynthesizer synth(cfg.kernel, spec);
    OriginSamples out;
    const auto n = static_cast<std::size_t>(n_samples);
    out.alpha.resize(n);
    out.gradient.resize(n);
    out.t.resize(n);
    parallel_for(n, [&](std::size_t i) {
        const auto s = split_seed(seed, i);
        const FieldSample fs = synth.sample(s);
        const SlopeField sf = slope_field(fs, cfg.slope);
        out.alpha[i] = sf.alpha(0, 0);
        out.t[i] = sf.argmax_t(0, 0);
        out.gradient[i] = slope_gradient(fs, sf, {0, 0});
    });
    return out;
}

double silverman_bandwidth(const std::vector<double>& samples)
{
    if (samples.size() < 2)
        throw ConfigError("bandwidth: need at least two samples");
    const double sd = std::sqrt(stats::variance(samples));
    const double iqr = stats::quantile(samples, 0.75) - stats::quantile(samples, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0))
        spread = sd > 0 ? sd : 1.0;
    return 0.9 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
}

DensityEstimate::DensityEstimate(std::vector<double> samples, double bandwidth)
    : samples_(std::move(samples)), bandwidth_(bandwidth)
{
    if (samples_.empty())
        throw ConfigError("density estimate: no samples");
    if (!(bandwidth_ > 0))
        bandwidth_ = silverman_bandwidth(samples_);
    const auto [mn, mx] = std::minmax_element(samples_.begin(), samples_.end());
    min_ = *mn;
    max_ = *mx;
}

double DensityEstimate::operator()(double u) const
{
    double s = 0.0;
    for (double x : samples_)
        s += phi((u - x) / bandwidth_);
    return s / (static_cast<double>(samples_.size()) * bandwidth_);
}

Vector DensityEstimate::evaluate(const Vector& grid) const
{
    Vector out(grid.size());
    parallel_for(static_cast<std::size_t>(grid.size()),
                 [&](std::size_t i) { out[static_cast<Eigen::Index>(i)] = (*this)(grid[static_cast<Eigen::Index>(i)]); });
    return out;
}

double DensityEstimate::integral(double lo, double hi, int steps) const
{
    const double du = (hi - lo) / steps;
    double s = 0.5 * ((*this)(lo) + (*this)(hi));
    for (int i = 1; i < steps; ++i)
        s += (*this)(lo + i * du);
    return s * du;
}

double nadaraya_watson(const std::vector<double>& x, const std::vector<double>& y, double bandwidth, double u)
{
    if (x.size() != y.size() || x.empty())
        throw ShapeError("nadaraya_watson: x and y must be non-empty and equally long");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double w = phi((u - x[i]) / bandwidth);
        num += w * y[i];
        den += w;
    }
    return den > 0 ? num / den : 0.0;
}

std::vector<std::vector<double>> level_length_draws(const OriginConfig& cfg, double box,
                                                    const std::vector<double>& levels, int n_draws,
                                                    std::uint64_t seed)
{
    if (n_draws < 1 || !(box > 0))
        throw ConfigError("level_length_draws: need n_draws >= 1 and a positive box");
    const int cells = std::max(1, static_cast<int>(std::lround(box / cfg.h)));
    const int margin = margin_cells(cfg.kernel, cfg.h, cfg.slope);
    const GridSpec spec = make_grid(cfg.kernel, cells + 1 + margin, cells + 1, cfg.h);
    const FieldSynthesizer synth(cfg.kernel, spec);
    const CellRect rect{0, 0, cells, cells};
    std::vector<std::vector<double>> out(levels.size(), std::vector<double>(static_cast<std::size_t>(n_draws)));
    parallel_for(static_cast<std::size_t>(n_draws), [&](std::size_t i) {
        const auto s = split_seed(seed, i);
        // Fixed ray length everywhere, matching the single-row draws of
        // sample_alpha_at_origin, so that alpha is stationary over the box.
        const SlopeField sf = windowed_slope_field(synth.sample(s), (margin + 0.5) * cfg.h, cfg.slope);
        for (std::size_t k = 0; k < levels.size(); ++k)
            out[k][i] = level_set_length(sf.alpha, levels[k], rect, cfg.h).length;
    });
    return out;
}

std::vector<KacRiceRow> kac_rice_compare(const OriginSamples& samples, const std::vector<double>& levels,
                                         const std::vector<std::vector<double>>& sigma_draws, double volume,
                                         const KacRiceOptions& opts)
{
    if (sigma_draws.size() != levels.size())
        throw ShapeError("kac_rice_compare: one list of sigma draws per level expected");
    const DensityEstimate kde(samples.alpha, opts.bandwidth);
    for (double l : levels)
        if (l < kde.min() || l > kde.max())
            throw SupportError("kac_rice_compare: level " + std::to_string(l) + " outside the sampled range [" +
                               std::to_string(kde.min()) + ", " + std::to_string(kde.max()) + "]");
    const auto norms = samples.gradient_norm();
    const std::size_t n = samples.alpha.size();
    const double b = kde.bandwidth();
    const double z = stats::normal_quantile(opts.confidence);

    // vol * (1 / (n b)) sum_i phi((l - a_i) / b) |grad_i| = vol * NW * KDE.
    auto rhs_of = [&](const std::vector<std::size_t>& idx, double l) {
        double s = 0.0;
        for (auto i : idx)
            s += phi((l - samples.alpha[i]) / b) * norms[i];
        return volume * s / (static_cast<double>(idx.size()) * b);
    };

    std::vector<std::vector<double>> boot(levels.size(), std::vector<double>(static_cast<std::size_t>(opts.resamples)));
    parallel_for(static_cast<std::size_t>(opts.resamples), [&](std::size_t r) {
        RngStream rng(split_seed(opts.seed, r));
        std::vector<std::size_t> idx(n);
        for (auto& i : idx)
            i = rng.below(n);
        for (std::size_t k = 0; k < levels.size(); ++k)
            boot[k][r] = rhs_of(idx, levels[k]);
    });

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::vector<KacRiceRow> rows;
    for (std::size_t k = 0; k < levels.size(); ++k) {
        KacRiceRow row;
        row.level = levels[k];
        row.lhs = stats::mean(sigma_draws[k]);
        row.lhs_se = sigma_draws[k].size() > 1 ? stats::standard_error(sigma_draws[k]) : 0.0;
        row.lhs_ci = {row.lhs - z * row.lhs_se, row.lhs + z * row.lhs_se};
        row.density = kde(levels[k]);
        row.conditional_mean = nadaraya_watson(samples.alpha, norms, b, levels[k]);
        row.rhs = rhs_of(all, levels[k]);
        const double alpha_tail = 0.5 * (1 - opts.confidence);
        row.rhs_ci = {stats::quantile(boot[k], alpha_tail), stats::quantile(boot[k], 1 - alpha_tail)};
        const double rhs_se = row.rhs_ci.width() / (2 * z);
        row.agree = std::abs(row.lhs - row.rhs) <= z * std::hypot(row.lhs_se, rhs_se);
        rows.push_back(row);
    }
    return rows;
}

} // namespace shadow
