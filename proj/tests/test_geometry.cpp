#include <doctest.h>

#include "shadowlab/geometry.hpp"
#include "shadowlab/rng.hpp"

#include <cmath>
#include <numbers>

using namespace shadow;

namespace {

// All-pairs distances by Floyd-Warshall over the open cells.
Eigen::MatrixXd floyd(const ExcursionMask& m)
{
    const int n = m.spec.nx * m.spec.ny;
    Eigen::MatrixXd d = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::infinity());
    const int reach = m.connectivity == Connectivity::four ? 4 : 8;
    const int dx[8] = {1, -1, 0, 0, 1, 1, -1, -1}, dy[8] = {0, 0, 1, -1, 1, -1, 1, -1};
    for (int y = 0; y < m.spec.ny; ++y)
        for (int x = 0; x < m.spec.nx; ++x) {
            if (!m.open(y, x))
                continue;
            const int i = y * m.spec.nx + x;
            d(i, i) = 0;
            for (int k = 0; k < reach; ++k) {
                const int u = x + dx[k], v = y + dy[k];
                if (u >= 0 && v >= 0 && u < m.spec.nx && v < m.spec.ny && m.open(v, u))
                    d(i, v * m.spec.nx + u) = (k < 4 ? 1.0 : std::sqrt(2.0)) * m.spec.h;
            }
        }
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
    return d;
}

MaskGrid random_mask(int nx, int ny, double p, std::uint64_t seed)
{
    RngStream rng(seed);
    MaskGrid m(ny, nx);
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
            m(y, x) = rng.uniform() < p;
    return m;
}

// Components of 20 to 200 cells of superlevel sets of smooth random fields.
std::vector<MaskGrid> blobs(int count)
{
    const Kernel k = Kernel::gaussian();
    const FieldSynthesizer synth(k, make_grid(k, 40, 40, 0.3));
    std::vector<MaskGrid> out;
    for (std::uint64_t s = 0; static_cast<int>(out.size()) < count; ++s) {
        const auto fs = synth.sample(s);
        const MaskGrid open = (fs.f > 0.3 * static_cast<double>(s % 5)).cast<std::uint8_t>();
        IntGrid lab;
        const int n = label_components(open, Connectivity::four, lab);
        for (int c = 0; c < n && static_cast<int>(out.size()) < count; ++c) {
            const MaskGrid one = (lab == c).cast<std::uint8_t>();
            const int size = one.cast<int>().sum();
            if (size >= 20 && size <= 200)
                out.push_back(one);
        }
    }
    return out;
}

} // namespace

TEST_SUITE("geometry")
{
    TEST_CASE("straight corridor")
    {
        MaskGrid open = MaskGrid::Zero(3, 12);
        open.row(1).setOnes();
        const auto m = make_mask(open, Connectivity::eight, 0.25);
        const auto r = chemical_distance(m, {0, 1}, {11, 1});
        CHECK(r.found);
        CHECK(r.length == 11 * 0.25);
        CHECK(r.cells.size() == 12);
        CHECK_FALSE(chemical_distance(m, {0, 0}, {11, 1}).found);
        CHECK_THROWS_AS(chemical_distance(m, {0, 1}, {12, 1}), BoundsError);
    }

    TEST_CASE("L-shaped corridor against all-pairs oracle")
    {
        for (auto conn : {Connectivity::four, Connectivity::eight}) {
            MaskGrid open = MaskGrid::Zero(8, 9);
            open.block(6, 0, 1, 9).setOnes(); // horizontal arm
            open.block(0, 8, 7, 1).setOnes(); // vertical arm
            const auto m = make_mask(open, conn, 0.5);
            const auto oracle = floyd(m);
            const auto r = chemical_distance(m, {0, 6}, {8, 0});
            REQUIRE(r.found);
            CHECK(r.length == doctest::Approx(oracle(6 * 9 + 0, 0 * 9 + 8)));
            const double manhattan = (8 + 6) * 0.5;
            if (conn == Connectivity::four)
                CHECK(r.length == doctest::Approx(manhattan));
            else
                CHECK(r.length == doctest::Approx(manhattan - (2 - std::sqrt(2.0)) * 0.5));
        }
    }

    TEST_CASE("distances on random masks")
    {
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto m = make_mask(random_mask(7, 6, 0.7, s), s % 2 ? Connectivity::four : Connectivity::eight, 0.3);
            const auto oracle = floyd(m);
            for (int i = 0; i < 42; i += 5)
                for (int j = 0; j < 42; j += 3) {
                    const Cell a{i % 7, i / 7}, b{j % 7, j / 7};
                    const auto r = chemical_distance(m, a, b);
                    CHECK(r.found == std::isfinite(oracle(i, j)));
                    if (!r.found)
                        continue;
                    CHECK(r.length == doctest::Approx(oracle(i, j)));
                    CHECK(r.length >= 0.3 * std::hypot(a.x - b.x, a.y - b.y) - 1e-12);
                    for (int k = 0; k < 42; k += 7) {
                        const Cell c{k % 7, k / 7};
                        const auto ac = chemical_distance(m, a, c), cb = chemical_distance(m, c, b);
                        if (ac.found && cb.found)
                            CHECK(r.length <= ac.length + cb.length + 1e-12);
                    }
                }
        }
    }

    TEST_CASE("open convex region: distance equals the Euclidean one along axes and diagonals")
    {
        const auto m = make_mask(MaskGrid::Ones(10, 10), Connectivity::eight, 0.2);
        CHECK(chemical_distance(m, {1, 1}, {8, 8}).length == doctest::Approx(7 * std::sqrt(2.0) * 0.2));
        CHECK(chemical_distance(m, {0, 3}, {9, 3}).length == doctest::Approx(9 * 0.2));
    }

    TEST_CASE("diameters")
    {
        MaskGrid one = MaskGrid::Zero(5, 5);
        one(2, 2) = 1;
        CHECK(chemical_diameter(make_mask(one), 0).value == 0.0);

        MaskGrid bar = MaskGrid::Zero(3, 5);
        bar.block(1, 1, 1, 3).setOnes();
        const auto m = make_mask(bar, Connectivity::eight, 0.5);
        CHECK(chemical_diameter(m, 0).value == doctest::Approx(1.0));
        CHECK(chemical_diameter(m, 0).exact);
        CHECK_THROWS_AS(chemical_diameter(m, 1), IdError);
        CHECK_THROWS_AS(chemical_diameter(m, -1), IdError);
    }

    TEST_CASE("double sweep stays within 10% of the exact diameter")
    {
        const auto suite = blobs(500);
        for (std::size_t s = 0; s < suite.size(); ++s) {
            const auto m = make_mask(suite[s], s % 3 ? Connectivity::eight : Connectivity::four);
            REQUIRE(m.components == 1);
            const auto exact = chemical_diameter(m, 0);
            const auto sweep = double_sweep_diameter(m, 0);
            REQUIRE(exact.exact);
            CHECK_FALSE(sweep.exact);
            CHECK(sweep.value <= exact.value + 1e-12);
            CHECK(sweep.value >= 0.9 * exact.value);
        }
        const auto big = make_mask(MaskGrid::Ones(25, 25));
        CHECK_FALSE(chemical_diameter(big, 0).exact);
        CHECK(chemical_diameter(big, 0, 1000).exact);
    }

    TEST_CASE("sum of chemical diameters")
    {
        const CellRect box{0, 0, 6, 4};
        CHECK(s_chem(make_mask(MaskGrid::Zero(5, 7)), box).total == 0.0);

        MaskGrid two = MaskGrid::Zero(5, 7);
        two.block(0, 0, 1, 3).setOnes();
        two.block(4, 3, 1, 3).setOnes();
        const auto s = s_chem(make_mask(two, Connectivity::eight, 0.5), box);
        CHECK(s.total == doctest::Approx(2.0));
        CHECK(s.components == 2);

        // Oracle: components of mask ∩ box, diameters from all-pairs distances
        // in the whole mask.
        for (std::uint64_t k = 0; k < 15; ++k) {
            const auto m = make_mask(random_mask(8, 7, 0.55, 40 + k), Connectivity::eight, 0.5);
            const CellRect b{1, 1, 5, 5};
            const auto d = floyd(m);
            MaskGrid inner = MaskGrid::Zero(7, 8);
            inner.block(1, 1, 5, 5) = m.open.block(1, 1, 5, 5);
            IntGrid lab;
            const int n = label_components(inner, Connectivity::eight, lab);
            double total = 0;
            for (int c = 0; c < n; ++c) {
                double diam = 0;
                for (int i = 0; i < 56; ++i)
                    for (int j = 0; j < 56; ++j)
                        if (lab(i / 8, i % 8) == c && lab(j / 8, j % 8) == c)
                            diam = std::max(diam, d(i, j));
                total += diam;
            }
            CHECK(s_chem(m, b).total == doctest::Approx(total));
        }
    }

    TEST_CASE("marching squares: circle, vertical line, empty level")
    {
        const double h = 0.05;
        const int n = 61; // [-1.5, 1.5]^2
        Grid g(n, n);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                g(y, x) = std::hypot(x * h - 1.5, y * h - 1.5);
        const CellRect all{0, 0, n - 1, n - 1};
        const auto c = level_set_length(g, 1.0, all, h);
        CHECK(std::abs(c.length - 2 * std::numbers::pi) <= 0.01 * 2 * std::numbers::pi);
        const auto none = level_set_length(g, -1.0, all, h);
        CHECK(none.length == 0.0);
        CHECK(none.segments == 0);

        Grid line(11, 11);
        for (int y = 0; y < 11; ++y)
            for (int x = 0; x < 11; ++x)
                line(y, x) = x * 0.1;
        const auto l = level_set_length(line, 0.5, {0, 0, 10, 10}, 0.1);
        CHECK(std::abs(l.length - 1.0) <= 1e-12);
        const auto l2 = level_set_length(line, 0.55, {0, 0, 10, 10}, 0.1);
        CHECK(std::abs(l2.length - 1.0) <= 1e-12);
        CHECK_THROWS_AS(level_set_length(line, 0.5, {0, 0, 11, 10}, 0.1), BoundsError);
    }

    TEST_CASE("saddle resolved by the centre value")
    {
        Grid g(2, 2);
        g << 1.0, 0.0, 0.0, 1.0; // v00 = 1, v10 = 0, v01 = 0, v11 = 1
        const auto above = level_set_segments(g, 0.4, {0, 0, 1, 1}, 1.0);
        const auto below = level_set_segments(g, 0.6, {0, 0, 1, 1}, 1.0);
        REQUIRE(above.size() == 2);
        REQUIRE(below.size() == 2);
        // Centre 0.5 above 0.4: the two below corners are cut off.
        for (const auto& s : above)
            CHECK(std::abs((s.a + s.b).x() / 2 - 0.5) > 0.2);
        for (const auto& s : below)
            CHECK(std::abs((s.a + s.b).y() / 2 - 0.5) > 0.2);
    }

    TEST_CASE("level set length is additive over a 2x2 partition")
    {
        RngStream rng(5);
        Grid g(33, 33);
        for (int y = 0; y < 33; ++y)
            for (int x = 0; x < 33; ++x)
                g(y, x) = std::sin(0.3 * x) + std::cos(0.25 * y) + 0.1 * rng.normal();
        for (double l : {-0.5, 0.0, 0.7}) {
            const double whole = level_set_length(g, l, {0, 0, 32, 32}, 0.1).length;
            const double parts = level_set_length(g, l, {0, 0, 16, 16}, 0.1).length +
                                 level_set_length(g, l, {16, 0, 32, 16}, 0.1).length +
                                 level_set_length(g, l, {0, 16, 16, 32}, 0.1).length +
                                 level_set_length(g, l, {16, 16, 32, 32}, 0.1).length;
            CHECK(whole == doctest::Approx(parts).epsilon(1e-12));
        }
    }

    TEST_CASE("coarea identity on a plane")
    {
        const double h = 0.01;
        Grid alpha(101, 101), norm = Grid::Ones(101, 101);
        for (int y = 0; y < 101; ++y)
            for (int x = 0; x < 101; ++x)
                alpha(y, x) = -x * h;
        const CellRect box{0, 0, 100, 100};
        const auto r = coarea_check(alpha, norm, h, box, {TestFunction::Kind::indicator, -0.6, -0.4}, {-1.0, 0.0, 200});
        CHECK(r.lhs == doctest::Approx(0.2).epsilon(1e-9));
        CHECK(r.rhs == doctest::Approx(0.2).epsilon(1e-9));
        CHECK(r.rel_err <= 1e-6);

        const auto z = coarea_check(alpha, norm, h, box, {TestFunction::Kind::zero}, {-1.0, 0.0, 200});
        CHECK(z.lhs == 0.0);
        CHECK(z.rhs == 0.0);
        CHECK(z.rel_err == 0.0);
    }

    TEST_CASE("coarea error shrinks under refinement on a curved field")
    {
        // g = x^2 + y^2 on [0, 1]^2 with |grad g| = 2 |z|.
        double prev = 1.0;
        for (int n : {20, 40, 80, 160}) {
            const double h = 1.0 / n;
            Grid g(n + 1, n + 1), gn(n + 1, n + 1);
            for (int y = 0; y <= n; ++y)
                for (int x = 0; x <= n; ++x) {
                    g(y, x) = (x * h) * (x * h) + (y * h) * (y * h);
                    gn(y, x) = 2 * std::hypot(x * h, y * h);
                }
            const auto r =
                coarea_check(g, gn, h, {0, 0, n, n}, {TestFunction::Kind::bump, 0.2, 1.2}, {0.0, 2.0, 10 * n});
            CHECK(r.rel_err < prev);
            prev = r.rel_err;
        }
        CHECK(prev < 1e-3);
    }

    TEST_CASE("density estimate and kernel regression")
    {
        RngStream rng(77);
        std::vector<double> x(500), y(500);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = rng.normal() * 0.7 + 1.0;
            y[i] = 2.0 * x[i] + 1.0;
        }
        const DensityEstimate kde(x);
        CHECK(kde.bandwidth() == doctest::Approx(silverman_bandwidth(x)));
        const double lo = kde.min() - 10 * kde.bandwidth(), hi = kde.max() + 10 * kde.bandwidth();
        CHECK(kde.integral(lo, hi) == doctest::Approx(1.0).epsilon(1e-6));
        for (double u : {-3.0, 0.0, 1.0, 5.0})
            CHECK(kde(u) >= 0.0);
        // Linear regression is recovered where the design is dense.
        CHECK(nadaraya_watson(x, y, 0.05, 1.0) == doctest::Approx(3.0).epsilon(0.01));
    }

    TEST_CASE("alpha at a point")
    {
        const OriginConfig cfg{Kernel::gaussian(), 0.25, {.level_floor = 0.02}};
        const auto s = sample_alpha_at_origin(cfg, 200, 4);
        REQUIRE(s.alpha.size() == 200);
        int positive = 0;
        for (std::size_t i = 0; i < s.alpha.size(); ++i) {
            CHECK(std::isfinite(s.alpha[i]));
            CHECK(std::isfinite(s.gradient[i].norm()));
            CHECK(s.t[i] >= 0.0);
            positive += s.alpha[i] > 0;
        }
        CHECK(positive >= 198);
        const auto again = sample_alpha_at_origin(cfg, 200, 4);
        CHECK(again.alpha == s.alpha);

        const std::vector<double> levels{1e6};
        CHECK_THROWS_AS(kac_rice_compare(s, levels, {{1.0}}, 1.0), SupportError);
    }
}
