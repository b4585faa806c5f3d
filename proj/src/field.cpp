#include "shadowlab/field.hpp"

#include "shadowlab/rng.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <vector>

namespace shadow {

namespace {

using Spectrum = FieldSynthesizer::Spectrum;

// In-place 2-D transform: columns, then rows. Eigen's inverse carries the 1/n.
void fft2(Spectrum& a, bool inverse)
{
    Eigen::FFT<double> fft;
    const auto rows = a.rows();
    const auto cols = a.cols();
    std::vector<std::complex<double>> in(static_cast<std::size_t>(std::max(rows, cols)));
    std::vector<std::complex<double>> out(in.size());

    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r)
            in[static_cast<std::size_t>(r)] = a(r, c);
        if (inverse)
            fft.inv(out.data(), in.data(), rows);
        else
            fft.fwd(out.data(), in.data(), rows);
        for (Eigen::Index r = 0; r < rows; ++r)
            a(r, c) = out[static_cast<std::size_t>(r)];
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
        std::complex<double>* row = a.row(r).data();
        std::copy(row, row + cols, in.begin());
        if (inverse)
            fft.inv(out.data(), in.data(), cols);
        else
            fft.fwd(out.data(), in.data(), cols);
        std::copy(out.begin(), out.begin() + cols, row);
    }
}

// Second-order jet of a scalar function of one variable.
struct Jet {
    double v, d, dd;
};

Jet operator+(Jet a, Jet b) { return {a.v + b.v, a.d + b.d, a.dd + b.dd}; }

Jet operator/(Jet u, Jet w)
{
    const double q = u.v / w.v;
    const double qd = (u.d - q * w.d) / w.v;
    const double qdd = (u.dd - 2 * qd * w.d - q * w.dd) / w.v;
    return {q, qd, qdd};
}

// phi(t) = exp(-1/t) for t > 0, else 0, with derivatives in t.
Jet phi(double t)
{
    if (t <= 0.0)
        return {0.0, 0.0, 0.0};
    const double v = std::exp(-1.0 / t);
    const double t2 = t * t;
    return {v, v / t2, v * (1.0 / (t2 * t2) - 2.0 / (t2 * t))};
}

// Smooth step from 1 (t <= 0) to 0 (t >= 1).
Jet smooth_step(double t)
{
    Jet a = phi(1.0 - t);
    a.d = -a.d; // chain rule for the argument 1 - t
    const Jet b = phi(t);
    return a / (a + b);
}

} // namespace

int fft_size(int n)
{
    for (int m = std::max(n, 1);; ++m) {
        int r = m;
        for (int p : {2, 3, 5})
            while (r % p == 0)
                r /= p;
        if (r == 1)
            return m;
    }
}

GridSpec make_grid(const Kernel& k, int nx, int ny, double h, Point origin)
{
    if (nx < 1 || ny < 1)
        throw ConfigError("grid dimensions must be positive");
    if (!(h > 0.0))
        throw ConfigError("grid spacing h must be positive");
    GridSpec spec;
    spec.origin = origin;
    spec.h = h;
    spec.nx = nx;
    spec.ny = ny;
    spec.pad = static_cast<int>(std::ceil(k.trunc_radius() / h - 1e-9));
    return spec;
}

Grid sample_white_noise(const GridSpec& spec, std::uint64_t seed)
{
    const CounterRng rng(seed);
    Grid noise(spec.padded_ny(), spec.padded_nx());
    const auto n = noise.size();
    double* data = noise.data();
    for (Eigen::Index i = 0; i < n; ++i)
        data[i] = rng.normal(static_cast<std::uint64_t>(i));
    return noise;
}

std::array<double, 6> cutoff_jet(Point z, double R)
{
    const double r = z.norm();
    if (r <= R / 4)
        return {1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    if (r >= R / 2)
        return {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    const Jet s = smooth_step(4.0 * r / R - 1.0);
    const double p1 = s.d * 4.0 / R;
    const double p2 = s.dd * 16.0 / (R * R);
    const double x = z.x(), y = z.y();
    const double r2 = r * r, r3 = r2 * r;
    return {s.v,
            p1 * x / r,
            p1 * y / r,
            p2 * x * x / r2 + p1 * y * y / r3,
            p2 * x * y / r2 - p1 * x * y / r3,
            p2 * y * y / r2 + p1 * x * x / r3};
}

FieldSynthesizer::FieldSynthesizer(const Kernel& k, const GridSpec& spec, std::optional<double> truncation)
    : kernel_(k), spec_(spec), truncation_(truncation)
{
    if (spec.nx < 1 || spec.ny < 1 || !(spec.h > 0.0))
        throw ConfigError("invalid grid spec");
    const int need = static_cast<int>(std::ceil(k.trunc_radius() / spec.h - 1e-9));
    if (spec.pad < need)
        throw ConfigError("grid padding " + std::to_string(spec.pad) + " is smaller than the kernel support (" +
                          std::to_string(need) + " cells)");
    if (truncation && !(*truncation >= 1.0))
        throw ConfigError("truncation radius R must be at least 1");

    mx_ = fft_size(spec.padded_nx());
    my_ = fft_size(spec.padded_ny());
    for (auto& s : kernel_hat_)
        s = Spectrum::Zero(my_, mx_);

    const int pad = spec.pad;
    const double t2 = k.trunc_radius() * k.trunc_radius();
    for (int dy = -pad; dy <= pad; ++dy) {
        for (int dx = -pad; dx <= pad; ++dx) {
            const Point z(dx * spec.h, dy * spec.h);
            if (z.squaredNorm() > t2)
                continue;
            auto q = k.jet(z);
            if (truncation && z.norm() > *truncation / 4) {
                const auto c = cutoff_jet(z, *truncation);
                q = {q[0] * c[0],
                     q[1] * c[0] + q[0] * c[1],
                     q[2] * c[0] + q[0] * c[2],
                     q[3] * c[0] + 2 * q[1] * c[1] + q[0] * c[3],
                     q[4] * c[0] + q[1] * c[2] + q[2] * c[1] + q[0] * c[4],
                     q[5] * c[0] + 2 * q[2] * c[2] + q[0] * c[5]};
            }
            const int iy = (dy % my_ + my_) % my_;
            const int ix = (dx % mx_ + mx_) % mx_;
            for (std::size_t p = 0; p < 3; ++p)
                kernel_hat_[p](iy, ix) = {q[2 * p], q[2 * p + 1]};
        }
    }
    for (auto& s : kernel_hat_)
        fft2(s, false);
}

Spectrum FieldSynthesizer::noise_spectrum(const Grid& noise) const
{
    if (noise.rows() != spec_.padded_ny() || noise.cols() != spec_.padded_nx())
        throw ShapeError("noise grid does not match the padded grid");
    Spectrum a = Spectrum::Zero(my_, mx_);
    a.topLeftCorner(noise.rows(), noise.cols()) = noise.matrix().cast<std::complex<double>>();
    fft2(a, false);
    return a;
}

FieldSample FieldSynthesizer::synthesize_spectrum(const Spectrum& noise_hat, std::uint64_t seed) const
{
    if (noise_hat.rows() != my_ || noise_hat.cols() != mx_)
        throw ShapeError("noise spectrum does not match the transform size");
    FieldSample out{spec_, kernel_, {}, {}, {}, {}, {}, {}, seed, truncation_};
    std::array<Grid*, 6> targets = {&out.f, &out.df1, &out.df2, &out.d2f11, &out.d2f12, &out.d2f22};
    const int pad = spec_.pad;
    const double h = spec_.h;
    for (std::size_t p = 0; p < 3; ++p) {
        Spectrum prod = noise_hat.cwiseProduct(kernel_hat_[p]);
        fft2(prod, true);
        const auto window = prod.block(pad, pad, spec_.ny, spec_.nx);
        *targets[2 * p] = window.real().array() * h;
        *targets[2 * p + 1] = window.imag().array() * h;
    }
    return out;
}

FieldSample FieldSynthesizer::synthesize(const Grid& noise, std::uint64_t seed) const
{
    return synthesize_spectrum(noise_spectrum(noise), seed);
}

FieldSample convolve_field(const Grid& noise, const Kernel& k, const GridSpec& spec, std::uint64_t seed)
{
    return FieldSynthesizer(k, spec).synthesize(noise, seed);
}

FieldSample truncated_field(const Grid& noise, const Kernel& k, double R, const GridSpec& spec, std::uint64_t seed)
{
    if (!(R >= 1.0))
        throw ConfigError("truncation radius R must be at least 1 (got " + std::to_string(R) + ")");
    return FieldSynthesizer(k, spec, R).synthesize(noise, seed);
}

} // namespace shadow
