#include "shadowlab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace shadow {

namespace {

// Radial profile G and its first two derivatives with respect to u = |z|^2.
struct Radial {
    double g = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

// Coefficients of the quartic that continues v^-p inside v < 1: the Taylor
// polynomial of v^-p at v = 1, written in powers of (1 - v).
std::array<double, 5> power_inner_coefficients(double p)
{
    std::array<double, 5> c{};
    c[0] = 1.0;
    for (int k = 1; k < 5; ++k)
        c[static_cast<std::size_t>(k)] = c[static_cast<std::size_t>(k - 1)] * (p + k - 1) / k;
    return c;
}

Radial radial(KernelFamily family, const std::vector<double>& params, double u)
{
    switch (family) {
    case KernelFamily::gaussian: {
        const double s2 = params[0] * params[0];
        const double g = std::exp(-u / (2 * s2));
        return {g, -g / (2 * s2), g / (4 * s2 * s2)};
    }
    case KernelFamily::bump: {
        const double rho2 = params[0] * params[0];
        const double v = u / rho2;
        if (v >= 1.0)
            return {};
        const double w = 1.0 - v;
        const double g = std::exp(1.0 - 1.0 / w);
        const double dv = -g / (w * w);
        const double dvv = g / (w * w * w * w) - 2 * g / (w * w * w);
        return {g, dv / rho2, dvv / (rho2 * rho2)};
    }
    case KernelFamily::power_tail: {
        const double s2 = params[0] * params[0];
        const double p = params[2] / 2;
        const double v = u / s2;
        if (v >= 1.0) {
            const double g = std::pow(v, -p);
            return {g, -p * g / v / s2, p * (p + 1) * g / (v * v) / (s2 * s2)};
        }
        const auto c = power_inner_coefficients(p);
        const double w = 1.0 - v;
        double g = 0.0, dv = 0.0, dvv = 0.0;
        for (int k = 4; k >= 0; --k) {
            const auto kk = static_cast<std::size_t>(k);
            g += c[kk] * std::pow(w, k);
            if (k >= 1)
                dv -= k * c[kk] * std::pow(w, k - 1);
            if (k >= 2)
                dvv += k * (k - 1) * c[kk] * std::pow(w, k - 2);
        }
        return {g, dv / s2, dvv / (s2 * s2)};
    }
    }
    return {};
}

} // namespace

std::string to_string(KernelFamily family)
{
    switch (family) {
    case KernelFamily::gaussian:
        return "gaussian";
    case KernelFamily::bump:
        return "bump";
    case KernelFamily::power_tail:
        return "power_tail";
    }
    return "?";
}

KernelFamily parse_family(const std::string& name)
{
    if (name == "gaussian")
        return KernelFamily::gaussian;
    if (name == "bump")
        return KernelFamily::bump;
    if (name == "power_tail")
        return KernelFamily::power_tail;
    throw ConfigError("unknown kernel family '" + name + "' (expected gaussian, bump or power_tail)");
}

double default_trunc_radius(KernelFamily family, const std::vector<double>& params)
{
    switch (family) {
    case KernelFamily::gaussian:
        return params[0] * std::sqrt(2.0 * std::log(1e12));
    case KernelFamily::bump:
        return params[0];
    case KernelFamily::power_tail: {
        // The 1e-12 rule puts the radius at ~1e4 scales for beta = 3, far
        // beyond any grid; cap at 32 scales.
        const auto c = power_inner_coefficients(params[2] / 2);
        double q0 = 0.0;
        for (double ck : c)
            q0 += ck;
        const double r = params[0] * std::pow(1e12 * q0, 1.0 / params[2]);
        return std::min(r, 32.0 * params[0]);
    }
    }
    return 0.0;
}

Kernel::Kernel(KernelFamily family, std::vector<double> params, double trunc_radius, int max_derivative_order)
    : family_(family), params_(std::move(params)), trunc_radius_(trunc_radius), max_order_(max_derivative_order)
{
    const std::size_t needed = family_ == KernelFamily::power_tail ? 3 : 2;
    if (params_.size() > needed)
        throw ConfigError("kernel '" + to_string(family_) + "' takes at most " + std::to_string(needed) +
                          " parameters");
    static constexpr double defaults[] = {1.0, 1.0, 3.0};
    while (params_.size() < needed)
        params_.push_back(defaults[params_.size()]);
    if (!(params_[0] > 0.0) || !std::isfinite(params_[0]))
        throw ConfigError("kernel scale must be positive");
    if (!std::isfinite(params_[1]))
        throw ConfigError("kernel amplitude must be finite");
    if (family_ == KernelFamily::power_tail && !(params_[2] > 1.0))
        throw ConfigError("power_tail exponent beta must exceed 1 (square integrability)");
    if (max_order_ < 0 || max_order_ > 2)
        throw ConfigError("max_derivative_order must be 0, 1 or 2");
    if (trunc_radius_ < 0.0)
        trunc_radius_ = default_trunc_radius(family_, params_);
    if (!std::isfinite(trunc_radius_))
        throw ConfigError("trunc_radius must be finite");
}

Kernel Kernel::gaussian(double scale, double amplitude, double trunc_radius)
{
    return Kernel(KernelFamily::gaussian, {scale, amplitude}, trunc_radius);
}

Kernel Kernel::bump(double radius, double amplitude) { return Kernel(KernelFamily::bump, {radius, amplitude}); }

Kernel Kernel::power_tail(double beta, double scale, double amplitude, double trunc_radius)
{
    return Kernel(KernelFamily::power_tail, {scale, amplitude, beta}, trunc_radius);
}

double Kernel::beta() const { return family_ == KernelFamily::power_tail ? params_[2] : 3.0; }

std::array<double, 6> Kernel::jet(Point z) const
{
    const double x = z.x();
    const double y = z.y();
    const double u = x * x + y * y;
    const Radial r = radial(family_, params_, u);
    const double a = params_[1];
    return {a * r.g,
            a * r.d1 * 2 * x,
            a * r.d1 * 2 * y,
            a * (r.d2 * 4 * x * x + 2 * r.d1),
            a * r.d2 * 4 * x * y,
            a * (r.d2 * 4 * y * y + 2 * r.d1)};
}

double Kernel::raw(Point z, DerivativeOrder order) const
{
    if (order.dx < 0 || order.dy < 0 || order.total() > max_order_)
        throw OrderError("derivative order (" + std::to_string(order.dx) + "," + std::to_string(order.dy) +
                         ") exceeds supported order " + std::to_string(max_order_));
    const auto j = jet(z);
    if (order.total() == 0)
        return j[0];
    if (order.total() == 1)
        return order.dx == 1 ? j[1] : j[2];
    if (order.dx == 2)
        return j[3];
    if (order.dx == 1)
        return j[4];
    return j[5];
}

double eval_kernel(const Kernel& k, Point z, DerivativeOrder order)
{
    const double value = k.raw(z, order);
    if (z.squaredNorm() > k.trunc_radius() * k.trunc_radius())
        return 0.0;
    return value;
}

double covariance_at(const Covariance& cov, Point z)
{
    const Kernel& k = cov.kernel;
    // Built-in kernels are radial, so K depends on (|x|, |y|) only; folding the
    // lag makes K(z) and K(-z) bitwise equal.
    const Point lag(std::abs(z.x()), std::abs(z.y()));
    if (cov.mode == CovarianceMode::closed_form && k.family() == KernelFamily::gaussian) {
        const double s = k.scale();
        const double a = k.amplitude();
        return a * a * std::numbers::pi * s * s * std::exp(-lag.squaredNorm() / (4 * s * s));
    }

    const double step = cov.step_fraction * k.scale();
    const double t = k.trunc_radius();
    const int n = static_cast<int>(std::ceil(t / step));
    const double t2 = t * t;
    double sum = 0.0;
    for (int iy = -n; iy <= n; ++iy) {
        const double y = iy * step;
        double row = 0.0;
        for (int ix = -n; ix <= n; ++ix) {
            const Point p(ix * step, y);
            if (p.squaredNorm() > t2)
                continue;
            const Point q = lag - p;
            if (q.squaredNorm() > t2)
                continue;
            row += k.jet(p)[0] * k.jet(q)[0];
        }
        sum += row;
    }
    return sum * step * step;
}

bool ValidationReport::all_passed() const
{
    return std::all_of(items.begin(), items.end(), [](const ValidationItem& i) { return i.passed; });
}

const ValidationItem* ValidationReport::find(const std::string& name) const
{
    for (const auto& item : items)
        if (item.name == name)
            return &item;
    return nullptr;
}

ValidationReport validate_assumptions(const Kernel& k, double tol)
{
    if (!(tol > 0.0))
        throw ConfigError("validate_assumptions: tol must be positive");
    ValidationReport report;

    report.items.push_back({"smoothness", true, "C^4 with L^2 derivatives by construction of the built-in family"});

    {
        const double beta = k.beta();
        std::ostringstream os;
        os << "beta = " << beta;
        report.items.push_back({"beta > 5/2", beta > 2.5, os.str()});
    }

    {
        const double t = std::max(k.trunc_radius(), 1.0);
        double worst = 0.0;
        for (int iy = -8; iy <= 8; ++iy)
            for (int ix = -8; ix <= 8; ++ix) {
                const Point z(t * ix / 8.0, t * iy / 8.0 * 0.93);
                worst = std::max(worst, std::abs(eval_kernel(k, z) - eval_kernel(k, -z)));
            }
        std::ostringstream os;
        os << "max |q(z) - q(-z)| = " << worst << " on a 17x17 grid";
        report.items.push_back({"symmetry", worst <= tol, os.str()});
    }

    {
        // Fit log max_direction |d^a q| against log r on 32 radii in [1, trunc].
        const double beta = k.beta();
        const double t = k.trunc_radius();
        bool ok = true;
        std::ostringstream os;
        if (t <= 1.0) {
            os << "support inside the unit ball";
        } else {
            const DerivativeOrder orders[] = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
            for (const auto order : orders) {
                if (order.total() > k.max_derivative_order())
                    continue;
                std::vector<double> lx, ly;
                for (int i = 0; i < 32; ++i) {
                    const double r = std::exp(std::log(t) * i / 31.0);
                    double m = 0.0;
                    for (int d = 0; d < 16; ++d) {
                        const double th = 2 * std::numbers::pi * d / 16.0;
                        m = std::max(m, std::abs(eval_kernel(k, Point(r * std::cos(th), r * std::sin(th)), order)));
                    }
                    if (m > 0.0) {
                        lx.push_back(std::log(r));
                        ly.push_back(std::log(m));
                    }
                }
                if (lx.size() < 2)
                    continue;
                double mx = 0, my = 0;
                for (std::size_t i = 0; i < lx.size(); ++i) {
                    mx += lx[i];
                    my += ly[i];
                }
                mx /= static_cast<double>(lx.size());
                my /= static_cast<double>(lx.size());
                double sxx = 0, sxy = 0;
                for (std::size_t i = 0; i < lx.size(); ++i) {
                    sxx += (lx[i] - mx) * (lx[i] - mx);
                    sxy += (lx[i] - mx) * (ly[i] - my);
                }
                const double slope = sxx > 0 ? sxy / sxx : 0.0;
                os << "order(" << order.dx << "," << order.dy << ") slope " << slope << "; ";
                if (slope > -beta + tol)
                    ok = false;
            }
        }
        report.items.push_back({"decay", ok, os.str()});
    }

    {
        const double k0 = covariance_at({k, CovarianceMode::numeric_convolution}, Point::Zero());
        std::ostringstream os;
        os << "(q*q)(0) = " << k0;
        report.items.push_back({"(q*q)(0) > 0", k0 > 0.0, os.str()});
    }
    return report;
}

} // namespace shadow
