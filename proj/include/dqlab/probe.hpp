#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <utility>

#include <Eigen/Dense>

#include "dqlab/errors.hpp"
#include "dqlab/kernel.hpp"
#include "dqlab/spectral.hpp"
#include "dqlab/time_grid.hpp"

namespace dqlab {

namespace detail {

/// (1,-2,1)/dt^2 tridiagonal stencil with one-sided second-order
/// second-difference boundary rows.
inline Eigen::MatrixXd second_difference(const TimeGrid& grid) {
    const int n = grid.size();
    const double inv = 1.0 / (grid.dt() * grid.dt());
    Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i + 1 < n; ++i) {
        d2(i, i - 1) = inv;
        d2(i, i) = -2.0 * inv;
        d2(i, i + 1) = inv;
    }
    d2(0, 0) = 2.0 * inv;
    d2(0, 1) = -5.0 * inv;
    d2(0, 2) = 4.0 * inv;
    d2(0, 3) = -inv;
    d2(n - 1, n - 1) = 2.0 * inv;
    d2(n - 1, n - 2) = -5.0 * inv;
    d2(n - 1, n - 3) = 4.0 * inv;
    d2(n - 1, n - 4) = -inv;
    return d2;
}

} // namespace detail

/// Free-mass response kernel, realizing -m d^2/dt^2: matrix -m D2/dt.
/// The interior block is exactly symmetric (no dissipation); only the two
/// one-sided boundary rows deviate.
inline TwoTimeKernel free_mass_response(double mass, const TimeGrid& grid) {
    if (!(mass > 0.0)) throw validation_error("free_mass_response: mass must be positive");
    Eigen::MatrixXd m = (-mass / grid.dt()) * detail::second_difference(grid);
    return TwoTimeKernel(grid, std::move(m));
}

/// H * d(delta)/dt — stationary velocity damping with friction coefficient H.
/// Spectrum -i*Omega*H; exactly antisymmetric.
inline TwoTimeKernel velocity_damping_kernel(double friction, const TimeGrid& grid) {
    if (!(friction >= 0.0))
        throw validation_error("velocity_damping_kernel: friction must be nonnegative");
    return friction * delta_derivative_kernel(grid);
}

/// Damped-oscillator response m (d^2/dt^2 + gamma d/dt + omega0^2), with the
/// sign convention frozen so that the interior spectrum is
///   chi^-1(Omega) = m (omega0^2 - Omega^2) - i m gamma Omega,
/// i.e. Im chi^-1(Omega) < 0 for Omega > 0.
inline TwoTimeKernel damped_oscillator_response(double mass, double omega0, double gamma,
                                                const TimeGrid& grid) {
    if (!(mass > 0.0))
        throw validation_error("damped_oscillator_response: mass must be positive");
    if (!(gamma >= 0.0))
        throw validation_error("damped_oscillator_response: damping must be nonnegative");
    if (!(omega0 >= 0.0))
        throw validation_error("damped_oscillator_response: resonance must be nonnegative");
    const int n = grid.size();
    Eigen::MatrixXd m = (mass / grid.dt()) * detail::second_difference(grid);
    m += (mass * gamma) * delta_derivative_kernel(grid).values();
    m += (mass * omega0 * omega0 / grid.dt()) * Eigen::MatrixXd::Identity(n, n);
    return TwoTimeKernel(grid, std::move(m));
}

/// Instantaneous rigidity K(t,t') = K0(t) delta(t-t').
inline TwoTimeKernel rigidity_kernel(const TimeSeries& profile) {
    const int n = profile.size();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    const double inv_dt = 1.0 / profile.grid().dt();
    for (int i = 0; i < n; ++i) m(i, i) = profile[i] * inv_dt;
    return TwoTimeKernel(profile.grid(), std::move(m));
}

/// Explicit rigidity kernel passes through unchanged.
inline TwoTimeKernel rigidity_kernel(const TwoTimeKernel& explicit_kernel) {
    return explicit_kernel;
}

/// chi_K^-1 = chi^-1 + K.
inline TwoTimeKernel modified_response(const TwoTimeKernel& chi_inv, const TwoTimeKernel& rigidity) {
    require_same_grid(chi_inv.grid(), rigidity.grid(), "modified_response");
    return chi_inv + rigidity;
}

/// Replace the two boundary rows with delta rows. Differential-operator
/// kernels are singular on an open window (their null space holds the
/// homogeneous solutions); pinning the endpoint samples makes them
/// invertible so the compositional inverse exists.
inline TwoTimeKernel regularize_boundary(const TwoTimeKernel& k) {
    const int n = k.size();
    Eigen::MatrixXd m = k.values();
    m.row(0).setZero();
    m.row(n - 1).setZero();
    m(0, 0) = 1.0 / k.grid().dt();
    m(n - 1, n - 1) = 1.0 / k.grid().dt();
    return TwoTimeKernel(k.grid(), std::move(m));
}

/// Free-mass response in frequency domain: -m Omega^2.
inline SpectralDensity free_mass_spectrum(double mass, Eigen::VectorXd omegas) {
    Eigen::VectorXcd v(omegas.size());
    for (int j = 0; j < omegas.size(); ++j)
        v[j] = std::complex<double>(-(mass * (omegas[j] * omegas[j])), 0.0);
    return SpectralDensity(std::move(omegas), std::move(v));
}

/// Damped-oscillator response in frequency domain under the frozen sign
/// convention: m (omega0^2 - Omega^2) - i m gamma Omega.
inline SpectralDensity damped_oscillator_spectrum(double mass, double omega0, double gamma,
                                                  Eigen::VectorXd omegas) {
    Eigen::VectorXcd v(omegas.size());
    for (int j = 0; j < omegas.size(); ++j) {
        const double om = omegas[j];
        v[j] = std::complex<double>(mass * (omega0 * omega0 - om * om), -(mass * gamma * om));
    }
    return SpectralDensity(std::move(omegas), std::move(v));
}

/// Declarative probe description used by scenarios.
struct ProbeModel {
    enum class Kind { free_mass, damped_oscillator, custom };

    Kind kind = Kind::free_mass;
    double mass = 1.0;
    double omega0 = 0.0; // oscillator only
    double gamma = 0.0;  // oscillator only
    std::optional<TwoTimeKernel> custom;

    static ProbeModel free_mass(double mass) {
        if (!(mass > 0.0)) throw validation_error("ProbeModel: mass must be positive");
        ProbeModel p;
        p.kind = Kind::free_mass;
        p.mass = mass;
        return p;
    }

    static ProbeModel damped_oscillator(double mass, double omega0, double gamma) {
        if (!(mass > 0.0)) throw validation_error("ProbeModel: mass must be positive");
        if (!(omega0 >= 0.0)) throw validation_error("ProbeModel: resonance must be nonnegative");
        if (!(gamma >= 0.0)) throw validation_error("ProbeModel: damping must be nonnegative");
        ProbeModel p;
        p.kind = Kind::damped_oscillator;
        p.mass = mass;
        p.omega0 = omega0;
        p.gamma = gamma;
        return p;
    }

    static ProbeModel custom_kernel(TwoTimeKernel k) {
        ProbeModel p;
        p.kind = Kind::custom;
        p.custom = std::move(k);
        return p;
    }

    TwoTimeKernel response_kernel(const TimeGrid& grid) const {
        switch (kind) {
            case Kind::free_mass:
                return free_mass_response(mass, grid);
            case Kind::damped_oscillator:
                return damped_oscillator_response(mass, omega0, gamma, grid);
            case Kind::custom:
                require_same_grid(custom->grid(), grid, "ProbeModel::response_kernel");
                return *custom;
        }
        throw validation_error("ProbeModel: unknown kind");
    }

    /// Analytic spectrum for the named kinds; custom kernels have none.
    SpectralDensity response_spectrum(Eigen::VectorXd omegas) const {
        switch (kind) {
            case Kind::free_mass:
                return free_mass_spectrum(mass, std::move(omegas));
            case Kind::damped_oscillator:
                return damped_oscillator_spectrum(mass, omega0, gamma, std::move(omegas));
            case Kind::custom:
                throw validation_error("ProbeModel: custom probes have no analytic spectrum");
        }
        throw validation_error("ProbeModel: unknown kind");
    }
};

} // namespace dqlab
