#include <doctest.h>

#include "shadowlab/rng.hpp"
#include "shadowlab/slope.hpp"

#include <cmath>
#include <functional>

using namespace shadow;

namespace {

Eigen::ArrayXd random_row(int n, std::uint64_t seed, double step = 1.0)
{
    RngStream rng(seed);
    Eigen::ArrayXd a(n);
    double v = 0;
    for (int i = 0; i < n; ++i)
        a[i] = v += step * rng.normal();
    return a;
}

// Field sample holding an analytic function and its derivatives.
FieldSample analytic(int nx, int ny, double h, const std::function<std::array<double, 6>(double, double)>& g)
{
    GridSpec spec;
    spec.h = h;
    spec.nx = nx;
    spec.ny = ny;
    FieldSample fs{spec, Kernel::gaussian(), Grid(ny, nx), Grid(ny, nx), Grid(ny, nx), Grid(ny, nx), Grid(ny, nx),
                   Grid(ny, nx), 0, std::nullopt};
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            const auto v = g(x * h, y * h);
            fs.f(y, x) = v[0];
            fs.df1(y, x) = v[1];
            fs.df2(y, x) = v[2];
            fs.d2f11(y, x) = v[3];
            fs.d2f12(y, x) = v[4];
            fs.d2f22(y, x) = v[5];
        }
    return fs;
}

} // namespace

TEST_SUITE("slope")
{
    TEST_CASE("hull sweep equals brute force bitwise on random rows")
    {
        for (std::uint64_t s = 0; s < 50; ++s) {
            const int n = 2 + static_cast<int>(s * 7 % 300);
            const auto f = random_row(n, s);
            const Eigen::ArrayXd d = random_row(n, s + 1000, 0.0) + Eigen::ArrayXd::Constant(n, 0.3 * (s % 5) - 0.6);
            const auto a = slope_row_hull(f, d, 0.25);
            const auto b = slope_row_bruteforce(f, d, 0.25);
            CHECK((a.alpha == b.alpha).all());
            CHECK((a.t == b.t).all());
        }
    }

    TEST_CASE("hull sweep in single precision")
    {
        const Eigen::ArrayXf f = random_row(200, 4).cast<float>();
        const Eigen::ArrayXf d = random_row(200, 5).cast<float>();
        const auto a = slope_row_hull(f, d, 0.5f);
        const auto b = slope_row_bruteforce(f, d, 0.5f);
        CHECK((a.alpha == b.alpha).all());
        CHECK((a.t == b.t).all());
    }

    TEST_CASE("exhaustive small rows with ties")
    {
        // Every f in {-1, 0, 1}^n, n <= 7, against several derivative rows.
        for (int n = 2; n <= 7; ++n) {
            int total = 1;
            for (int i = 0; i < n; ++i)
                total *= 3;
            for (int code = 0; code < total; ++code) {
                Eigen::ArrayXd f(n);
                for (int i = 0, c = code; i < n; ++i, c /= 3)
                    f[i] = c % 3 - 1;
                for (double d0 : {-1.0, 0.0, 0.5, 1.0, 2.0}) {
                    const Eigen::ArrayXd d = Eigen::ArrayXd::Constant(n, d0);
                    const auto a = slope_row_hull(f, d, 1.0);
                    const auto b = slope_row_bruteforce(f, d, 1.0);
                    REQUIRE((a.alpha == b.alpha).all());
                    REQUIRE((a.t == b.t).all());
                }
            }
        }
    }

    TEST_CASE("windowed sup equals brute force for every window")
    {
        for (std::uint64_t s = 0; s < 6; ++s) {
            const int n = 40 + static_cast<int>(s) * 13;
            const auto f = random_row(n, 100 + s);
            const auto d = random_row(n, 200 + s, 0.5);
            for (int w = 0; w <= n + 2; ++w) {
                const auto a = slope_row_window(f, d, 0.1, w);
                const auto b = slope_row_bruteforce(f, d, 0.1, std::max(w, 0));
                if (w == 0) {
                    CHECK((a.alpha == d).all());
                    CHECK((a.t == 0.0).all());
                    continue;
                }
                REQUIRE((a.alpha == b.alpha).all());
                REQUIRE((a.t == b.t).all());
            }
        }
    }

    TEST_CASE("windowed sup on exhaustive small rows")
    {
        for (int code = 0; code < 3 * 3 * 3 * 3 * 3 * 3 * 3; ++code) {
            Eigen::ArrayXd f(7);
            for (int i = 0, c = code; i < 7; ++i, c /= 3)
                f[i] = c % 3 - 1;
            const Eigen::ArrayXd d = Eigen::ArrayXd::Constant(7, 0.0);
            for (int w = 1; w <= 6; ++w) {
                const auto a = slope_row_window(f, d, 1.0, w);
                const auto b = slope_row_bruteforce(f, d, 1.0, w);
                REQUIRE((a.alpha == b.alpha).all());
                REQUIRE((a.t == b.t).all());
            }
        }
    }

    TEST_CASE("row shape errors")
    {
        const Eigen::ArrayXd f = Eigen::ArrayXd::Zero(5), d3 = Eigen::ArrayXd::Zero(3), one = Eigen::ArrayXd::Zero(1);
        CHECK_THROWS_AS(slope_row_hull(f, d3, 1.0), ShapeError);
        CHECK_THROWS_AS(slope_row_hull(one, one, 1.0), ShapeError);
        CHECK_THROWS_AS(slope_row_hull(f, f, 0.0), ShapeError);
        CHECK_THROWS_AS(slope_row_window(f, d3, 1.0, 2), ShapeError);
    }

    TEST_CASE("concave and convex profiles")
    {
        // f = -x^2: every chord lies below the tangent, alpha = f'.
        const auto cap = analytic(30, 2, 0.1, [](double x, double) {
            return std::array<double, 6>{-x * x, -2 * x, 0, -2, 0, 0};
        });
        const auto sc = slope_field(cap, {.margin = 0});
        for (int x = 0; x < 30; ++x) {
            CHECK(sc.alpha(0, x) == cap.df1(0, x));
            CHECK(sc.argmax_t(0, x) == 0.0);
        }
        // f = x^2: the longest chord wins.
        const auto cup = analytic(30, 2, 0.1, [](double x, double) {
            return std::array<double, 6>{x * x, 2 * x, 0, 2, 0, 0};
        });
        const auto sv = slope_field(cup, {.margin = 0});
        for (int x = 0; x < 29; ++x)
            CHECK(sv.argmax_t(1, x) == doctest::Approx((29 - x) * 0.1));
    }

    TEST_CASE("gradient formula on an analytic field")
    {
        // f = sin(x) + 0.5 y cos(x): the sup is attained at isolated rays.
        auto g = [](double x, double y) {
            return std::array<double, 6>{std::sin(x) + 0.5 * y * std::cos(x), std::cos(x) - 0.5 * y * std::sin(x),
                                         0.5 * std::cos(x), -std::sin(x) - 0.5 * y * std::cos(x),
                                         -0.5 * std::sin(x), 0.0};
        };
        const double h = 0.01;
        const auto fs = analytic(1200, 3, h, g);
        const auto sf = slope_field(fs, {.margin = 0});
        for (int x : {50, 200, 400, 650}) {
            const auto grad = slope_gradient(fs, sf, {x, 1});
            // Both components by the envelope argument: differentiate the
            // chord at the fixed winning ray.
            const double T = sf.argmax_t(1, x);
            auto alpha_at = [&](double px, double py) {
                if (T == 0)
                    return g(px, py)[1];
                return (g(px + T, py)[0] - g(px, py)[0]) / T;
            };
            const double e = 1e-6;
            CHECK(grad.x() == doctest::Approx((alpha_at(x * h + e, h) - alpha_at(x * h - e, h)) / (2 * e)).epsilon(1e-5));
            CHECK(grad.y() == doctest::Approx((alpha_at(x * h, h + e) - alpha_at(x * h, h - e)) / (2 * e)).epsilon(1e-5));
            // and the y component against a difference of the discrete slope field
            const double fd = (sf.alpha(2, x) - sf.alpha(0, x)) / (2 * h);
            CHECK(grad.y() == doctest::Approx(fd).epsilon(1e-3));
        }
        CHECK_THROWS_AS(slope_gradient(fs, sf, {1200, 0}), BoundsError);
    }

    TEST_CASE("window cells and monotone windowed sup")
    {
        CHECK(window_cells(1.0, 0.25) == 3);
        CHECK(window_cells(1.01, 0.25) == 4);
        CHECK(window_cells(0.2, 0.25) == 0);
        CHECK(window_cells(0.0, 0.25) == 0);

        const Kernel k = Kernel::gaussian();
        const auto fs = FieldSynthesizer(k, make_grid(k, 120, 6, 0.25)).sample(8);
        const auto full = slope_field(fs, {.margin = 0});
        Grid prev = fs.df1;
        for (double R : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 64.0}) {
            const auto w = windowed_slope_field(fs, R);
            CHECK((w.alpha >= prev).all());
            CHECK((w.alpha <= full.alpha).all());
            prev = w.alpha;
        }
        CHECK((prev == full.alpha).all());
        CHECK_THROWS_AS(truncated_slope_field(fs), ContractError);
    }

    TEST_CASE("margin heuristic")
    {
        const double a = margin_length(std::numbers::pi, 0.5, 1e-3);
        const double b = margin_length(std::numbers::pi, 0.5, 1e-6);
        const double c = margin_length(std::numbers::pi, 1.0, 1e-3);
        CHECK(a > 0);
        CHECK(b > a);
        CHECK(c < a);
        // The defining tail sum at the returned length.
        const double sd = std::sqrt(2 * std::numbers::pi);
        double s = 0;
        for (int n = 0; n < 1000; ++n)
            s += 0.5 * std::erfc(0.5 * (a + n) / sd / std::sqrt(2.0));
        CHECK(s == doctest::Approx(1e-3).epsilon(1e-6));
        CHECK(margin_cells(Kernel::gaussian(), 0.25, {.margin = 7}) == 7);
        CHECK(margin_cells(Kernel::gaussian(), 0.25) == static_cast<int>(std::ceil(a / 0.25)));
    }

    TEST_CASE("argmax gap")
    {
        const auto cap = analytic(20, 1, 0.5, [](double x, double) {
            return std::array<double, 6>{-x * x, -2 * x, 0, -2, 0, 0};
        });
        // One decreasing run from the derivative term: nothing outside it.
        CHECK(std::isinf(argmax_gap(cap, {3, 0})));
        const auto wave = analytic(200, 1, 0.1, [](double x, double) {
            return std::array<double, 6>{std::sin(x), std::cos(x), 0, -std::sin(x), 0, 0};
        });
        const double gap = argmax_gap(wave, {10, 0});
        CHECK(gap >= 0.0);
        CHECK(std::isfinite(gap));
    }
}

TEST_SUITE("slope")
{
    TEST_CASE("worked rows")
    {
        const double h = 0.01;
        Eigen::ArrayXd f(700), d(700);
        for (int i = 0; i < 700; ++i) {
            f[i] = std::sin(i * h);
            d[i] = std::cos(i * h);
        }
        CHECK(slope_row_bruteforce(f, d, h).alpha[0] == doctest::Approx(1.0).epsilon(1e-4));
        CHECK(slope_row_hull(f, d, h).alpha[0] == doctest::Approx(1.0).epsilon(1e-4));

        const Eigen::ArrayXd two{{0.0, 1.0}}, zero = Eigen::ArrayXd::Zero(2);
        for (const auto& r : {slope_row_bruteforce(two, zero, 1.0), slope_row_hull(two, zero, 1.0)}) {
            CHECK(r.alpha[0] == 1.0);
            CHECK(r.t[0] == 1.0);
        }

        Eigen::ArrayXd line(50), slope(50);
        for (int i = 0; i < 50; ++i) {
            line[i] = -i * 0.25;
            slope[i] = -1.0;
        }
        const auto r = slope_row_hull(line, slope, 0.25);
        CHECK((r.alpha == -1.0).all());
        CHECK((r.t == 0.0).all());

        const Eigen::ArrayXd flat = Eigen::ArrayXd::Constant(30, 2.5);
        CHECK((slope_row_hull(flat, Eigen::ArrayXd::Zero(30), 0.5).alpha == 0.0).all());
    }

    TEST_CASE("plane field and the T = 0 gradient")
    {
        const auto plane = analytic(40, 4, 0.25, [](double x, double) {
            return std::array<double, 6>{-x, -1, 0, 0, 0, 0};
        });
        const auto sf = slope_field(plane, {.margin = 5});
        const auto in = sf.interior();
        for (int y = in.y0; y <= in.y1; ++y)
            for (int x = in.x0; x <= in.x1; ++x) {
                CHECK(sf.alpha(y, x) == -1.0);
                const auto g = slope_gradient(plane, sf, {x, y});
                CHECK(g.x() == 0.0);
                CHECK(g.y() == 0.0);
            }

        const auto cap = analytic(30, 2, 0.1, [](double x, double y) {
            return std::array<double, 6>{-x * x + x * y, -2 * x + y, x, -2, 1, 0};
        });
        const auto sc = slope_field(cap, {.margin = 0});
        REQUIRE(sc.argmax_t(1, 4) == 0.0);
        const auto g = slope_gradient(cap, sc, {4, 1});
        CHECK(g.x() == cap.d2f11(1, 4));
        CHECK(g.y() == cap.d2f12(1, 4));
    }

    TEST_CASE("translation, ramp and monotonicity in the data")
    {
        for (std::uint64_t s = 0; s < 50; ++s) {
            const double h = 0.2;
            const auto f = random_row(64, 600 + s, 0.3);
            const auto d = random_row(64, 700 + s, 0.3);
            const auto base = slope_row_hull(f, d, h);

            const auto shifted = slope_row_hull((f + 3.7).eval(), d, h);
            for (int i = 0; i < 64; ++i)
                CHECK(shifted.alpha[i] == doctest::Approx(base.alpha[i]).epsilon(1e-12).scale(1));

            const double ramp = 0.8;
            Eigen::ArrayXd fr(64);
            for (int i = 0; i < 64; ++i)
                fr[i] = f[i] + ramp * i * h;
            const auto tilted = slope_row_hull(fr, (d + ramp).eval(), h);
            for (int i = 0; i < 64; ++i)
                CHECK(tilted.alpha[i] == doctest::Approx(base.alpha[i] + ramp).epsilon(1e-12).scale(1));

            RngStream rng(800 + s);
            const auto j = static_cast<int>(1 + rng.below(63));
            Eigen::ArrayXd up = f;
            up[j] += 0.5 * rng.uniform();
            const auto raised = slope_row_hull(up, d, h);
            for (int i = 0; i < j; ++i)
                CHECK(raised.alpha[i] >= base.alpha[i]);
        }
    }

    TEST_CASE("sampled slope field dominates its short candidates")
    {
        const Kernel k = Kernel::gaussian();
        const double h = 0.25;
        const auto fs = FieldSynthesizer(k, make_grid(k, 200, 20, h)).sample(41);
        const auto sf = slope_field(fs);
        for (int y = 0; y < 20; ++y)
            for (int x = 0; x < 200; ++x) {
                CHECK(sf.alpha(y, x) >= fs.df1(y, x));
                if (x + 1 < 200)
                    CHECK(sf.alpha(y, x) >= (fs.f(y, x + 1) - fs.f(y, x)) / h);
                CHECK(sf.argmax_t(y, x) >= 0.0);
                CHECK(sf.argmax_t(y, x) <= (199 - x) * h + 1e-12);
            }
    }

    TEST_CASE("truncated sup below one cell and beyond the window")
    {
        const Kernel k = Kernel::gaussian();
        const double h = 2.0;
        const GridSpec spec = make_grid(k, 40, 4, h);
        const auto fs = truncated_field(sample_white_noise(spec, 5), k, 1.5, spec, 5);
        const auto short_ray = truncated_slope_field(fs);
        CHECK((short_ray.alpha == fs.df1).all());
        CHECK((short_ray.argmax_t == 0.0).all());

        const GridSpec fine = make_grid(k, 60, 4, 0.25);
        const auto fs16 = truncated_field(sample_white_noise(fine, 6), k, 16.0, fine, 6);
        const auto a = truncated_slope_field(fs16, {.margin = 0});
        const auto b = slope_field(fs16, {.margin = 0});
        CHECK((a.alpha == b.alpha).all());
        CHECK((a.argmax_t == b.argmax_t).all());
    }

    TEST_CASE("alpha is positive off the margin")
    {
        // Rays must be long for small alpha to show up: a low level floor
        // sets the margin.
        const Kernel k = Kernel::gaussian();
        const double h = 0.25;
        const SlopeOptions opts{.level_floor = 0.02};
        const int margin = margin_cells(k, h, opts);
        const FieldSynthesizer synth(k, make_grid(k, 16 + margin, 16, h));
        std::int64_t positive = 0, total = 0;
        for (std::uint64_t s = 0; s < 50; ++s) {
            const auto sf = slope_field(synth.sample(split_seed(900, s)), opts);
            const auto in = sf.interior();
            for (int y = in.y0; y <= in.y1; ++y)
                for (int x = in.x0; x <= in.x1; ++x) {
                    positive += sf.alpha(y, x) > 0;
                    ++total;
                }
        }
        CHECK(total == 50 * 16 * 16);
        CHECK(static_cast<double>(positive) >= 0.99 * static_cast<double>(total));
    }
}
