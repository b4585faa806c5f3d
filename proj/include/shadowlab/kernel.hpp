#pragma once

#include "shadowlab/core.hpp"

#include <array>
#include <string>
#include <vector>

namespace shadow {

enum class KernelFamily { gaussian, bump, power_tail };

std::string to_string(KernelFamily family);
KernelFamily parse_family(const std::string& name);

/// Partial derivative multi-index (d/dz1)^dx (d/dz2)^dy.
struct DerivativeOrder {
    int dx = 0;
    int dy = 0;
    int total() const { return dx + dy; }
};

/// Convolution kernel q. Parameters by family:
///   gaussian   [scale, amplitude]          q = A exp(-|z|^2 / (2 s^2))
///   bump       [radius, amplitude]         q = A exp(1 - 1 / (1 - |z|^2 / rho^2)) inside rho
///   power_tail [scale, amplitude, beta]    q = A (|z|/s)^-beta for |z| >= s, matched C^4
///                                          by a quartic in |z|^2 inside s
/// Missing trailing parameters take defaults (scale 1, amplitude 1, beta 3).
/// Immutable after construction.
class Kernel {
public:
    Kernel(KernelFamily family, std::vector<double> params, double trunc_radius = -1.0,
           int max_derivative_order = 2);

    static Kernel gaussian(double scale = 1.0, double amplitude = 1.0, double trunc_radius = -1.0);
    static Kernel bump(double radius = 1.0, double amplitude = 1.0);
    static Kernel power_tail(double beta = 3.0, double scale = 1.0, double amplitude = 1.0,
                             double trunc_radius = -1.0);

    KernelFamily family() const { return family_; }
    const std::vector<double>& params() const { return params_; }
    double trunc_radius() const { return trunc_radius_; }
    int max_derivative_order() const { return max_order_; }
    double scale() const { return params_[0]; }
    double amplitude() const { return params_[1]; }
    /// Polynomial decay exponent. Families with faster decay report the
    /// nominal exponent 3 used by the assumption checks.
    double beta() const;

    /// Untruncated value of the derivative `order` at z.
    double raw(Point z, DerivativeOrder order) const;

    /// Value, gradient and Hessian entries (q, q_1, q_2, q_11, q_12, q_22) at z,
    /// untruncated.
    std::array<double, 6> jet(Point z) const;

    friend bool operator==(const Kernel& a, const Kernel& b)
    {
        return a.family_ == b.family_ && a.params_ == b.params_ && a.trunc_radius_ == b.trunc_radius_;
    }

private:
    KernelFamily family_;
    std::vector<double> params_;
    double trunc_radius_;
    int max_order_;
};

/// Radius beyond which |q| < 1e-12 |q(0)| (power_tail: capped, see kernel.cpp).
double default_trunc_radius(KernelFamily family, const std::vector<double>& params);

/// d^order q(z), exactly 0 when |z| > trunc_radius.
double eval_kernel(const Kernel& k, Point z, DerivativeOrder order = {});

enum class CovarianceMode { closed_form, numeric_convolution };

/// K = q * q. Closed form is available for the gaussian family only; other
/// families always integrate numerically.
struct Covariance {
    Kernel kernel;
    CovarianceMode mode = CovarianceMode::numeric_convolution;
    /// Quadrature step of the numeric mode, as a fraction of the kernel scale.
    double step_fraction = 1.0 / 16.0;
};

/// (q * q)(z). The numeric mode uses the tensor trapezoid rule with step
/// `step_fraction * scale` on the square of half-width trunc_radius.
double covariance_at(const Covariance& cov, Point z);

struct ValidationItem {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationItem> items;
    bool all_passed() const;
    const ValidationItem* find(const std::string& name) const;
};

/// Check the kernel assumptions: smoothness (by construction), beta > 5/2,
/// symmetry on a sample grid, power-law decay of derivatives up to order 2
/// (log-log fit on 32 radii in [1, trunc_radius]) and (q * q)(0) > 0.
/// Failures are report entries, never exceptions.
ValidationReport validate_assumptions(const Kernel& k, double tol);

} // namespace shadow
