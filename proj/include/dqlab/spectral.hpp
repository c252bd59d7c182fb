#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "dqlab/errors.hpp"
#include "dqlab/kernel.hpp"
#include "dqlab/time_grid.hpp"

namespace dqlab {

/// Sampled function of frequency. Physical (symmetrized) spectral densities
/// are real and nonnegative; response-function spectra may be complex.
class SpectralDensity {
public:
    SpectralDensity(Eigen::VectorXd omegas, Eigen::VectorXcd values)
        : omegas_(std::move(omegas)), v_(std::move(values)) {
        if (omegas_.size() != v_.size())
            throw validation_error("SpectralDensity: length mismatch");
        if (!omegas_.allFinite() || !v_.allFinite())
            throw validation_error("SpectralDensity: non-finite entries");
        for (int j = 1; j < omegas_.size(); ++j)
            if (!(omegas_[j] > omegas_[j - 1]))
                throw validation_error("SpectralDensity: frequencies must be strictly increasing");
    }

    template <class F>
    static SpectralDensity sample(Eigen::VectorXd omegas, F&& f) {
        Eigen::VectorXcd v(omegas.size());
        for (int j = 0; j < omegas.size(); ++j) v[j] = std::complex<double>(f(omegas[j]));
        return SpectralDensity(std::move(omegas), std::move(v));
    }

    const Eigen::VectorXd& omegas() const { return omegas_; }
    const Eigen::VectorXcd& values() const { return v_; }
    std::complex<double> operator[](int j) const { return v_[j]; }
    int size() const { return v_.size(); }

private:
    Eigen::VectorXd omegas_;
    Eigen::VectorXcd v_;
};

/// The canonical frequency set of a grid: the DFT frequencies of the
/// symmetric lag grid tau_k = k*dt, k = -(N-1)..(N-1), i.e.
///   Omega_j = 2*pi*j / ((2N-1)*dt),  j = -(N-1)..(N-1), ascending.
/// On this set the Toeplitz <-> spectrum maps below invert each other
/// exactly (discrete Fourier inversion), not just to quadrature accuracy.
inline Eigen::VectorXd spectral_grid(const TimeGrid& grid) {
    const int n = grid.size();
    const int m = 2 * n - 1;
    const double dOmega = 2.0 * std::numbers::pi / (static_cast<double>(m) * grid.dt());
    Eigen::VectorXd omegas(m);
    for (int j = -(n - 1); j <= n - 1; ++j)
        omegas[j + n - 1] = static_cast<double>(j) * dOmega;
    return omegas;
}

template <class F>
SpectralDensity sample_spectrum(const TimeGrid& grid, F&& f) {
    return SpectralDensity::sample(spectral_grid(grid), std::forward<F>(f));
}

namespace detail {

/// Mean and max absolute deviation of kernel entries along the diagonal with
/// lag index k (tau = k*dt, i.e. row - col = k), restricted to rows and
/// columns at least `margin` away from the window edges. Returns count used.
struct DiagonalStat {
    double mean = 0.0;
    double max_dev = 0.0;
    int count = 0;
};

inline DiagonalStat diagonal_stat(const Eigen::MatrixXd& m, int k, int margin) {
    const int n = static_cast<int>(m.rows());
    DiagonalStat s;
    // rows i with both i and j = i-k inside [margin, n-1-margin]
    const int i_lo = std::max(margin, k + margin);
    const int i_hi = std::min(n - 1 - margin, n - 1 - margin + k);
    double sum = 0.0;
    for (int i = i_lo; i <= i_hi; ++i) {
        sum += m(i, i - k);
        ++s.count;
    }
    if (s.count == 0) return s;
    s.mean = sum / static_cast<double>(s.count);
    for (int i = i_lo; i <= i_hi; ++i)
        s.max_dev = std::max(s.max_dev, std::abs(m(i, i - k) - s.mean));
    return s;
}

} // namespace detail

/// Forward map: S(Omega_j) = sum_k B(tau_k) e^{+i Omega_j tau_k} dt over the
/// full lag set, with B(tau_k) read off the kernel diagonals.
///
/// The kernel must be Toeplitz within tolerance over the inspected region.
/// `edge_margin` excludes rows/columns near the window edges from both the
/// estimate and the check: compositions of stationary kernels on a finite
/// window are polluted there by integral truncation, while their interior
/// diagonals carry the stationary values.
inline SpectralDensity kernel_to_spectrum(const TwoTimeKernel& k, int edge_margin = 0,
                                          double toeplitz_tol = 1e-8) {
    const int n = k.size();
    if (edge_margin < 0 || 2 * edge_margin >= n - 1)
        throw validation_error("kernel_to_spectrum: edge margin leaves no interior");
    const double dt = k.grid().dt();
    const double scale = max_abs(k);
    const int m = 2 * n - 1;

    Eigen::VectorXd lag_values = Eigen::VectorXd::Zero(m);
    double worst_dev = 0.0;
    for (int lag = -(n - 1); lag <= n - 1; ++lag) {
        const auto st = detail::diagonal_stat(k.values(), lag, edge_margin);
        if (st.count == 0) continue; // diagonal lives entirely in the excluded corners
        lag_values[lag + n - 1] = st.mean;
        worst_dev = std::max(worst_dev, st.max_dev);
    }
    if (scale > 0.0 && worst_dev > toeplitz_tol * scale)
        throw validation_error("kernel_to_spectrum: kernel is not Toeplitz within tolerance, "
                               "max diagonal deviation " + std::to_string(worst_dev / scale) +
                               " of kernel norm");

    const Eigen::VectorXd omegas = spectral_grid(k.grid());
    Eigen::VectorXcd s(m);
    for (int j = 0; j < m; ++j) {
        std::complex<double> acc(0.0, 0.0);
        for (int lag = -(n - 1); lag <= n - 1; ++lag) {
            const double tau = static_cast<double>(lag) * dt;
            acc += lag_values[lag + n - 1] *
                   std::exp(std::complex<double>(0.0, omegas[j] * tau));
        }
        s[j] = acc * dt;
    }
    return SpectralDensity(omegas, std::move(s));
}

/// Backward map: B(tau_k) = (1/2pi) sum_j S(Omega_j) e^{-i Omega_j tau_k} dOmega,
/// then M(i,j) = B(t_i - t_j). The spectrum must be sampled on the canonical
/// frequency set of the grid and must correspond to a real kernel.
inline TwoTimeKernel toeplitz_from_spectrum(const SpectralDensity& s, const TimeGrid& grid) {
    const int n = grid.size();
    const int m = 2 * n - 1;
    if (s.size() != m)
        throw validation_error("toeplitz_from_spectrum: spectrum must be sampled on the "
                               "canonical frequency set (expected " + std::to_string(m) +
                               " samples, got " + std::to_string(s.size()) + ")");
    const Eigen::VectorXd omegas = spectral_grid(grid);
    const double omega_scale =
        2.0 * std::numbers::pi * static_cast<double>(n - 1) /
        (static_cast<double>(m) * grid.dt());
    for (int j = 0; j < m; ++j)
        if (std::abs(s.omegas()[j] - omegas[j]) > 1e-12 * omega_scale)
            throw validation_error("toeplitz_from_spectrum: frequency set does not match grid");

    const double dt = grid.dt();
    const double dOmega = 2.0 * std::numbers::pi / (static_cast<double>(m) * dt);
    Eigen::VectorXcd lag_values(m);
    for (int lag = -(n - 1); lag <= n - 1; ++lag) {
        const double tau = static_cast<double>(lag) * dt;
        std::complex<double> acc(0.0, 0.0);
        for (int j = 0; j < m; ++j)
            acc += s[j] * std::exp(std::complex<double>(0.0, -omegas[j] * tau));
        lag_values[lag + n - 1] = acc * dOmega / (2.0 * std::numbers::pi);
    }

    const double b_scale = lag_values.cwiseAbs().maxCoeff();
    const double imag_residue = lag_values.imag().cwiseAbs().maxCoeff();
    if (b_scale > 0.0 && imag_residue > 1e-9 * b_scale)
        throw validation_error("toeplitz_from_spectrum: spectrum does not describe a real "
                               "kernel (S(-Omega) = conj(S(Omega)) violated)");

    Eigen::MatrixXd mat(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) mat(i, j) = lag_values[(i - j) + n - 1].real();
    return TwoTimeKernel(grid, std::move(mat));
}

} // namespace dqlab
