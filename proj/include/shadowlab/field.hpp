#pragma once

#include "shadowlab/core.hpp"
#include "shadowlab/kernel.hpp"

#include <Eigen/Core>

#include <array>
#include <complex>
#include <cstdint>
#include <optional>

namespace shadow {

/// Grid whose padding covers the kernel support (pad = ceil(trunc_radius / h)).
GridSpec make_grid(const Kernel& k, int nx, int ny, double h, Point origin = Point::Zero());

/// Sampled field f = q * W on the window of `spec` with its first and second
/// derivatives. `truncation` is set iff this is the truncated field f_R.
struct FieldSample {
    GridSpec spec;
    Kernel kernel;
    Grid f, df1, df2, d2f11, d2f12, d2f22;
    std::uint64_t seed = 0;
    std::optional<double> truncation;
};

/// I.i.d. standard normals on the padded grid of `spec`, keyed by
/// (seed, cell index). The convolution multiplies by h, which turns these
/// into white-noise cell integrals of variance h^2.
Grid sample_white_noise(const GridSpec& spec, std::uint64_t seed);

/// Smooth radial cutoff chi_R(z) = chi(z / R): 1 on |z| <= R/4, 0 on |z| >= R/2.
/// Returns (chi, d1, d2, d11, d12, d22).
std::array<double, 6> cutoff_jet(Point z, double R);

/// Caches the kernel spectra for one (kernel, grid, truncation) triple so that
/// repeated draws cost one forward and three inverse FFTs.
class FieldSynthesizer {
public:
    FieldSynthesizer(const Kernel& k, const GridSpec& spec, std::optional<double> truncation = std::nullopt);

    /// Convolve a padded noise grid; `seed` is recorded in the sample.
    FieldSample synthesize(const Grid& noise, std::uint64_t seed = 0) const;
    FieldSample sample(std::uint64_t seed) const { return synthesize(sample_white_noise(spec_, seed), seed); }

    /// Spectrum of a padded noise grid, reusable across synthesizers that
    /// share the grid (coupled f and f_R draws).
    using Spectrum = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Spectrum noise_spectrum(const Grid& noise) const;
    FieldSample synthesize_spectrum(const Spectrum& noise_hat, std::uint64_t seed = 0) const;

    const GridSpec& spec() const { return spec_; }
    const Kernel& kernel() const { return kernel_; }
    std::optional<double> truncation() const { return truncation_; }
    int fft_nx() const { return mx_; }
    int fft_ny() const { return my_; }

private:
    Kernel kernel_;
    GridSpec spec_;
    std::optional<double> truncation_;
    int mx_ = 0;
    int my_ = 0;
    // Packed spectra of (q, q_1), (q_2, q_11), (q_12, q_22).
    std::array<Spectrum, 3> kernel_hat_;
};

/// f = q * W on the window, derivatives by convolving the same noise with the
/// derivatives of q. Throws ConfigError when the padding is smaller than the
/// kernel support.
FieldSample convolve_field(const Grid& noise, const Kernel& k, const GridSpec& spec, std::uint64_t seed = 0);

/// f_R = (q chi_R) * W on the same noise. Throws ConfigError when R < 1.
FieldSample truncated_field(const Grid& noise, const Kernel& k, double R, const GridSpec& spec,
                            std::uint64_t seed = 0);

/// Smallest 2,3,5-smooth integer >= n.
int fft_size(int n);

} // namespace shadow
