#include <doctest.h>

#include "shadowlab/kernel.hpp"

#include <cmath>
#include <numbers>

using namespace shadow;

namespace {

// Central differences of q itself, to check the analytic derivatives.
std::array<double, 6> fd_jet(const Kernel& k, Point z, double e)
{
    auto q = [&](double dx, double dy) { return k.raw(z + Point(dx, dy), {}); };
    return {q(0, 0),
            (q(e, 0) - q(-e, 0)) / (2 * e),
            (q(0, e) - q(0, -e)) / (2 * e),
            (q(e, 0) - 2 * q(0, 0) + q(-e, 0)) / (e * e),
            (q(e, e) - q(e, -e) - q(-e, e) + q(-e, -e)) / (4 * e * e),
            (q(0, e) - 2 * q(0, 0) + q(0, -e)) / (e * e)};
}

// (q*q)(0) for a radial kernel by Simpson's rule in r.
double radial_k0(const Kernel& k, double rmax, int n)
{
    const double dr = rmax / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double r = i * dr;
        const double q = k.raw({r, 0.0}, {});
        const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
        s += w * r * q * q;
    }
    return 2 * std::numbers::pi * s * dr / 3;
}

} // namespace

TEST_SUITE("kernel")
{
    TEST_CASE("gaussian covariance at zero is pi for unit scale and amplitude")
    {
        const Kernel k = Kernel::gaussian();
        CHECK(covariance_at({k, CovarianceMode::closed_form}, Point::Zero()) == doctest::Approx(std::numbers::pi));
        CHECK(covariance_at({k, CovarianceMode::numeric_convolution}, Point::Zero()) ==
              doctest::Approx(std::numbers::pi).epsilon(1e-8));
    }

    TEST_CASE("numeric covariance matches the gaussian closed form at a lag")
    {
        const Kernel k = Kernel::gaussian(1.3, 0.7);
        for (Point z : {Point(1.0, 0.5), Point(-2.0, 0.3), Point(0.0, 3.1)}) {
            const double oracle = 0.49 * std::numbers::pi * 1.69 * std::exp(-z.squaredNorm() / (4 * 1.69));
            CHECK(covariance_at({k, CovarianceMode::closed_form}, z) == doctest::Approx(oracle).epsilon(1e-12));
            CHECK(covariance_at({k, CovarianceMode::numeric_convolution}, z) == doctest::Approx(oracle).epsilon(1e-7));
        }
    }

    TEST_CASE("covariance is symmetric")
    {
        const Kernel k = Kernel::power_tail(3.0);
        const Covariance c{k, CovarianceMode::numeric_convolution, 1.0 / 4};
        const Point z(1.25, -0.75);
        CHECK(covariance_at(c, z) == covariance_at(c, -z));
        CHECK(covariance_at(c, z) == covariance_at(c, Point(z.x(), -z.y())));
    }

    TEST_CASE("bump covariance at zero matches a radial quadrature")
    {
        const Kernel k = Kernel::bump(1.5, 2.0);
        const double oracle = radial_k0(k, 1.5, 20000);
        CHECK(covariance_at({k}, Point::Zero()) == doctest::Approx(oracle).epsilon(1e-4));
    }

    TEST_CASE("analytic derivatives agree with finite differences")
    {
        const Kernel ks[] = {Kernel::gaussian(1.2, 0.8), Kernel::bump(2.0), Kernel::power_tail(2.8, 1.5, 0.6)};
        const Point zs[] = {Point(0.3, -0.4), Point(1.1, 0.7), Point(-0.2, 1.45), Point(1.4, 0.6), Point(2.5, -1.0)};
        for (const auto& k : ks)
            for (const auto& z : zs) {
                if (k.family() == KernelFamily::bump && z.norm() > 1.9)
                    continue;
                const auto a = k.jet(z);
                const auto n = fd_jet(k, z, 1e-4);
                for (std::size_t i = 0; i < 6; ++i)
                    CHECK(a[i] == doctest::Approx(n[i]).epsilon(1e-5).scale(1e-3));
            }
    }

    TEST_CASE("power tail is an exact power law outside its scale")
    {
        const Kernel k = Kernel::power_tail(3.5, 2.0, 1.5);
        for (double r : {2.0, 3.0, 10.0, 40.0})
            CHECK(k.raw({0.0, r}, {}) == doctest::Approx(1.5 * std::pow(r / 2.0, -3.5)).epsilon(1e-13));
        // Matched through second order at the junction.
        const auto in = k.jet({2.0 - 1e-7, 0.0});
        const auto out = k.jet({2.0 + 1e-7, 0.0});
        for (std::size_t i = 0; i < 6; ++i)
            CHECK(in[i] == doctest::Approx(out[i]).epsilon(1e-5));
    }

    TEST_CASE("derivative order above the kernel maximum is rejected")
    {
        const Kernel k(KernelFamily::gaussian, {1.0, 1.0}, -1.0, 1);
        CHECK_NOTHROW(k.raw({0.1, 0.2}, {1, 0}));
        CHECK_THROWS_AS(k.raw({0.1, 0.2}, {1, 1}), OrderError);
        CHECK_THROWS_AS(Kernel::gaussian().raw({0, 0}, {3, 0}), OrderError);
    }

    TEST_CASE("evaluation vanishes beyond the truncation radius")
    {
        const Kernel k = Kernel::gaussian(1.0, 1.0, 3.0);
        CHECK(eval_kernel(k, {2.9, 0.0}) > 0.0);
        CHECK(eval_kernel(k, {3.1, 0.0}) == 0.0);
        CHECK(eval_kernel(k, {0.0, 3.1}, {0, 2}) == 0.0);
        CHECK(Kernel::gaussian().trunc_radius() == doctest::Approx(std::sqrt(2 * std::log(1e12))));
    }

    TEST_CASE("unknown family and bad parameters")
    {
        CHECK_THROWS_AS(parse_family("cauchy"), ConfigError);
        CHECK(parse_family("power_tail") == KernelFamily::power_tail);
        CHECK_THROWS_AS(Kernel::power_tail(0.5), ConfigError);
    }

    TEST_CASE("assumption checks")
    {
        const auto good = validate_assumptions(Kernel::power_tail(3.0), 0.05);
        for (const auto& item : good.items)
            CHECK_MESSAGE(item.passed, item.name << ": " << item.detail);
        CHECK(good.all_passed());

        const auto slow = validate_assumptions(Kernel::power_tail(2.0), 0.05);
        REQUIRE(slow.find("beta > 5/2") != nullptr);
        CHECK_FALSE(slow.find("beta > 5/2")->passed);
        CHECK_FALSE(slow.all_passed());

        CHECK(validate_assumptions(Kernel::gaussian(), 0.05).all_passed());
        CHECK_THROWS_AS(validate_assumptions(Kernel::gaussian(), 0.0), ConfigError);
    }
}
