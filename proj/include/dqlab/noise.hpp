#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "dqlab/errors.hpp"
#include "dqlab/kernel.hpp"
#include "dqlab/spectral.hpp"
#include "dqlab/time_grid.hpp"

namespace dqlab {

/// The meter's quantum noise state: symmetrized covariances of the
/// imprecision noise x_fl, the back-action noise F_fl, their cross
/// correlation, plus the rigidity the meter induces.
///
/// B_Fx is represented implicitly as transpose(B_xF), matching
/// B_xF(t,t') = B_Fx(t',t).
struct NoiseCovariances {
    TwoTimeKernel bxx;
    TwoTimeKernel bff;
    TwoTimeKernel bxf;
    TwoTimeKernel rigidity;

    NoiseCovariances(TwoTimeKernel bxx_, TwoTimeKernel bff_, TwoTimeKernel bxf_,
                     TwoTimeKernel rigidity_)
        : bxx(std::move(bxx_)), bff(std::move(bff_)), bxf(std::move(bxf_)),
          rigidity(std::move(rigidity_)) {
        require_same_grid(bxx.grid(), bff.grid(), "NoiseCovariances");
        require_same_grid(bxx.grid(), bxf.grid(), "NoiseCovariances");
        require_same_grid(bxx.grid(), rigidity.grid(), "NoiseCovariances");
        check_symmetric(bxx, "B_xx");
        check_symmetric(bff, "B_FF");
    }

    const TimeGrid& grid() const { return bxx.grid(); }

private:
    static void check_symmetric(const TwoTimeKernel& k, const char* name) {
        const double norm = k.values().norm();
        const double asym = (k.values() - k.values().transpose()).norm();
        if (norm > 0.0 && asym > 1e-12 * norm)
            throw validation_error(std::string("NoiseCovariances: ") + name +
                                   " must be symmetric (autocorrelations are symmetrized)");
    }
};

/// Delta-correlated meter noise with time-dependent prefactors,
/// B_ab(t,t') = S_ab(t) delta(t-t').
struct MemorylessNoise {
    TimeSeries sxx;
    TimeSeries sff;
    TimeSeries sxf;

    MemorylessNoise(TimeSeries sxx_, TimeSeries sff_, TimeSeries sxf_)
        : sxx(std::move(sxx_)), sff(std::move(sff_)), sxf(std::move(sxf_)) {
        require_same_grid(sxx.grid(), sff.grid(), "MemorylessNoise");
        require_same_grid(sxx.grid(), sxf.grid(), "MemorylessNoise");
        for (int i = 0; i < sxx.size(); ++i)
            if (!(sxx[i] > 0.0) || !(sff[i] > 0.0))
                throw validation_error("MemorylessNoise: S_xx and S_FF must be positive "
                                       "everywhere");
    }

    const TimeGrid& grid() const { return sxx.grid(); }
};

struct PSDReport {
    double min_eigenvalue = 0.0;
    double matrix_norm = 0.0;
    bool passed = false;
    double tolerance = 0.0;
};

inline NoiseCovariances memoryless_covariances(const MemorylessNoise& noise) {
    const TimeGrid& grid = noise.grid();
    const int n = grid.size();
    const double inv_dt = 1.0 / grid.dt();
    Eigen::MatrixXd bxx = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd bff = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd bxf = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        bxx(i, i) = noise.sxx[i] * inv_dt;
        bff(i, i) = noise.sff[i] * inv_dt;
        bxf(i, i) = noise.sxf[i] * inv_dt;
    }
    return NoiseCovariances(TwoTimeKernel(grid, std::move(bxx)),
                            TwoTimeKernel(grid, std::move(bff)),
                            TwoTimeKernel(grid, std::move(bxf)),
                            TwoTimeKernel::zero(grid));
}

namespace detail {

inline void require_hermitian_spectrum(const SpectralDensity& s, const char* name) {
    const int m = s.size();
    const double scale = std::max(1e-300, s.values().cwiseAbs().maxCoeff());
    for (int j = 0; j < m; ++j) {
        // canonical grid is symmetric about zero: index j pairs with m-1-j
        const std::complex<double> diff = s[j] - std::conj(s[m - 1 - j]);
        if (std::abs(diff) > 1e-9 * scale)
            throw validation_error(std::string(name) +
                                   ": S(-Omega) = conj(S(Omega)) violated");
    }
}

inline void require_real_nonnegative_spectrum(const SpectralDensity& s, const char* name) {
    const double scale = std::max(1e-300, s.values().cwiseAbs().maxCoeff());
    for (int j = 0; j < s.size(); ++j) {
        if (std::abs(s[j].imag()) > 1e-9 * scale)
            throw validation_error(std::string(name) + ": spectrum must be real");
        if (s[j].real() < -1e-9 * scale)
            throw validation_error(std::string(name) + ": spectrum must be nonnegative");
    }
}

} // namespace detail

/// Stationary covariances from one-sided analytic spectra sampled on the
/// canonical frequency set of the grid. S_xx and S_FF must be real and
/// nonnegative; S_xF and K(Omega) must satisfy the reality condition
/// S(-Omega) = conj(S(Omega)).
inline NoiseCovariances stationary_covariances(const SpectralDensity& sxx,
                                               const SpectralDensity& sff,
                                               const SpectralDensity& sxf,
                                               const SpectralDensity& rigidity_spectrum,
                                               const TimeGrid& grid) {
    detail::require_real_nonnegative_spectrum(sxx, "stationary_covariances: S_xx");
    detail::require_real_nonnegative_spectrum(sff, "stationary_covariances: S_FF");
    detail::require_hermitian_spectrum(sxf, "stationary_covariances: S_xF");
    detail::require_hermitian_spectrum(rigidity_spectrum, "stationary_covariances: K");
    return NoiseCovariances(toeplitz_from_spectrum(sxx, grid),
                            toeplitz_from_spectrum(sff, grid),
                            toeplitz_from_spectrum(sxf, grid),
                            toeplitz_from_spectrum(rigidity_spectrum, grid));
}

inline NoiseCovariances stationary_covariances(const SpectralDensity& sxx,
                                               const SpectralDensity& sff,
                                               const SpectralDensity& sxf,
                                               const TimeGrid& grid) {
    return stationary_covariances(sxx, sff, sxf,
                                  sample_spectrum(grid, [](double) { return 0.0; }), grid);
}

/// Block-operator uncertainty relation: the 2N x 2N Hermitian matrix
///   [ B_FF + (i hbar/2)(K - K^T)   B_Fx + (i hbar/2) delta ]
///   [ B_xF - (i hbar/2) delta      B_xx                    ]
/// (each block scaled by dt) must be positive semidefinite for any quantum
/// meter. Discretized minimum-uncertainty states sit exactly on the PSD
/// boundary, so the verdict uses a relative slack on the minimum eigenvalue.
inline PSDReport check_uncertainty_block(const NoiseCovariances& noise,
                                         double hbar = default_hbar,
                                         double tolerance = 1e-9) {
    const int n = noise.grid().size();
    const double dt = noise.grid().dt();
    const std::complex<double> ih2(0.0, 0.5 * hbar);

    Eigen::MatrixXcd block(2 * n, 2 * n);
    const Eigen::MatrixXd& k = noise.rigidity.values();
    block.topLeftCorner(n, n) =
        noise.bff.values().cast<std::complex<double>>() * dt +
        ih2 * (k - k.transpose()).cast<std::complex<double>>() * dt;
    // B_Fx = transpose(B_xF); delta * dt = I
    block.topRightCorner(n, n) =
        noise.bxf.values().transpose().cast<std::complex<double>>() * dt +
        ih2 * Eigen::MatrixXcd::Identity(n, n);
    block.bottomLeftCorner(n, n) =
        noise.bxf.values().cast<std::complex<double>>() * dt -
        ih2 * Eigen::MatrixXcd::Identity(n, n);
    block.bottomRightCorner(n, n) = noise.bxx.values().cast<std::complex<double>>() * dt;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(block,
                                                           Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw numeric_error("check_uncertainty_block: eigenvalue solver failed");
    const Eigen::VectorXd evs = solver.eigenvalues();

    PSDReport report;
    report.min_eigenvalue = evs.minCoeff();
    report.matrix_norm = evs.cwiseAbs().maxCoeff();
    report.tolerance = tolerance;
    report.passed = report.min_eigenvalue >= -tolerance * report.matrix_norm;
    return report;
}

/// Stationary spectral uncertainty relation at a single frequency:
///   S_xx S_FF - |S_xF|^2 >= hbar |Im(conj(K) S_xx + S_xF)| + hbar^2/4.
inline bool check_uncertainty_stationary(double sxx, double sff, std::complex<double> sxf,
                                         std::complex<double> rigidity,
                                         double hbar = default_hbar) {
    const double lhs = sxx * sff - std::norm(sxf);
    const double rhs =
        hbar * std::abs(std::imag(std::conj(rigidity) * sxx + sxf)) + 0.25 * hbar * hbar;
    return lhs >= rhs;
}

/// Memoryless pointwise uncertainty relation at a single grid index:
///   S_xx(t) S_FF(t) - S_xF(t)^2 >= hbar^2/4.
inline bool check_uncertainty_memoryless(const MemorylessNoise& noise, int index,
                                         double hbar = default_hbar) {
    if (index < 0 || index >= noise.grid().size())
        throw validation_error("check_uncertainty_memoryless: index off the grid");
    const double lhs = noise.sxx[index] * noise.sff[index] - noise.sxf[index] * noise.sxf[index];
    return lhs >= 0.25 * hbar * hbar;
}

inline bool check_uncertainty_memoryless_all(const MemorylessNoise& noise,
                                             double hbar = default_hbar) {
    for (int i = 0; i < noise.grid().size(); ++i)
        if (!check_uncertainty_memoryless(noise, i, hbar)) return false;
    return true;
}

/// Probe thermal covariance B_TT. The default budget is zero (the quantum
/// constraints fix only the thermal commutator, never the symmetrized
/// magnitude, so any nonzero B_TT is a user choice).
inline TwoTimeKernel thermal_covariance(const TimeGrid& grid) {
    return TwoTimeKernel::zero(grid);
}

inline TwoTimeKernel thermal_covariance_white(double level, const TimeGrid& grid) {
    if (!(level >= 0.0))
        throw validation_error("thermal_covariance_white: level must be nonnegative");
    return level * delta_kernel(grid);
}

inline TwoTimeKernel thermal_covariance(const TwoTimeKernel& explicit_kernel) {
    const double norm = explicit_kernel.values().norm();
    const double asym =
        (explicit_kernel.values() - explicit_kernel.values().transpose()).norm();
    if (norm > 0.0 && asym > 1e-12 * norm)
        throw validation_error("thermal_covariance: explicit kernel must be symmetric");
    return explicit_kernel;
}

inline TwoTimeKernel thermal_covariance(const SpectralDensity& spectrum, const TimeGrid& grid) {
    detail::require_real_nonnegative_spectrum(spectrum, "thermal_covariance: S_TT");
    return thermal_covariance(toeplitz_from_spectrum(spectrum, grid));
}

} // namespace dqlab
