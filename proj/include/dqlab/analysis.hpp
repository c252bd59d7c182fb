#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dqlab/errors.hpp"
#include "dqlab/kernel.hpp"
#include "dqlab/noise.hpp"
#include "dqlab/spectral.hpp"
#include "dqlab/time_grid.hpp"

namespace dqlab {

/// All window integrals stand in for integrals over the whole real line, so
/// filters and signals must be numerically negligible near the window edges.
/// Returns a warning message when the series violates that contract.
inline std::optional<std::string> window_support_warning(const TimeSeries& series,
                                                         const std::string& label,
                                                         int margin = 5,
                                                         double tol = 1e-6) {
    const double peak = series.values().cwiseAbs().maxCoeff();
    if (peak == 0.0) return std::nullopt;
    const int n = series.size();
    double worst = 0.0;
    for (int i = 0; i < margin; ++i) {
        worst = std::max(worst, std::abs(series[i]));
        worst = std::max(worst, std::abs(series[n - 1 - i]));
    }
    if (worst >= tol * peak)
        return label + " is not negligible near the window edges (" +
               std::to_string(worst / peak) + " of peak within " + std::to_string(margin) +
               " samples); finite-window integrals are unreliable";
    return std::nullopt;
}

/// First derivative of a sampled series: central differences in the
/// interior, one-sided second-order stencils at the edges.
inline TimeSeries derivative_series(const TimeSeries& f) {
    const int n = f.size();
    const double dt = f.grid().dt();
    Eigen::VectorXd d(n);
    for (int i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * dt);
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dt);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dt);
    return TimeSeries(f.grid(), std::move(d));
}

/// Covariance of the sum noise referred to the force input:
///   B_sum = chiK^-1 B_xx (chiK^-1)^T + chiK^-1 B_xF + (chiK^-1 B_xF)^T + B_FF
/// under the composition convention. The assembled matrix must already be
/// symmetric to round-off; the residual asymmetry is then folded away.
inline TwoTimeKernel sum_noise_covariance(const NoiseCovariances& noise,
                                          const TwoTimeKernel& chiK_inv) {
    require_same_grid(noise.grid(), chiK_inv.grid(), "sum_noise_covariance");
    const double dt = chiK_inv.grid().dt();
    const Eigen::MatrixXd& c = chiK_inv.values();

    Eigen::MatrixXd cross = (c * noise.bxf.values()) * dt;
    Eigen::MatrixXd b = (c * noise.bxx.values() * c.transpose()) * (dt * dt);
    b += cross;
    b += cross.transpose();
    b += noise.bff.values();

    const double norm = b.norm();
    const double asym = (b - b.transpose()).norm();
    if (norm > 0.0 && asym > 1e-10 * norm)
        throw numeric_error("sum_noise_covariance: assembled covariance is not symmetric "
                            "(relative asymmetry " + std::to_string(asym / norm) + ")");
    Eigen::MatrixXd sym = 0.5 * (b + b.transpose()).eval();
    return TwoTimeKernel(chiK_inv.grid(), std::move(sym));
}

/// Autocommutator of the sum noise, as the real kernel C in
/// [F_sum(t), F_sum(t')] = i hbar C(t,t').
///
/// Computed two ways and cross-checked: directly as -2 chi_a^-1, and through
/// the composition route -chiK^-1 + (chiK^-1)^T + K - K^T in which the
/// rigidity cancels. Disagreement signals a construction bug.
inline TwoTimeKernel sum_noise_commutator(const TwoTimeKernel& chi_inv,
                                          const TwoTimeKernel& rigidity) {
    require_same_grid(chi_inv.grid(), rigidity.grid(), "sum_noise_commutator");

    const TwoTimeKernel direct = -2.0 * antisymmetric_part(chi_inv);

    const TwoTimeKernel chiK = chi_inv + rigidity;
    const TwoTimeKernel chiK_delta = compose(chiK, delta_kernel(chi_inv.grid()));
    const TwoTimeKernel via_composition =
        transposed(chiK_delta) - chiK_delta + rigidity - transposed(rigidity);

    const double scale =
        chi_inv.values().norm() + rigidity.values().norm() + 1e-300;
    const double mismatch = (direct.values() - via_composition.values()).norm();
    if (mismatch > 1e-12 * scale)
        throw numeric_error("sum_noise_commutator: composition route disagrees with "
                            "-2 chi_a^-1 (relative mismatch " +
                            std::to_string(mismatch / scale) + ")");
    return direct;
}

/// Measured relative disagreement between the two commutator routes, for
/// diagnostic reports. sum_noise_commutator() itself enforces the 1e-12 gate.
inline double sum_noise_commutator_mismatch(const TwoTimeKernel& chi_inv,
                                            const TwoTimeKernel& rigidity) {
    const TwoTimeKernel direct = -2.0 * antisymmetric_part(chi_inv);
    const TwoTimeKernel chiK = chi_inv + rigidity;
    const TwoTimeKernel chiK_delta = compose(chiK, delta_kernel(chi_inv.grid()));
    const TwoTimeKernel via_composition =
        transposed(chiK_delta) - chiK_delta + rigidity - transposed(rigidity);
    const double scale = chi_inv.values().norm() + rigidity.values().norm() + 1e-300;
    return (direct.values() - via_composition.values()).norm() / scale;
}

/// Commutator kernel of the processed output: sum-noise autocommutator plus
/// the thermal commutator 2 chi_a^-1. A classical output requires this to be
/// the zero kernel.
inline TwoTimeKernel output_commutator(const TwoTimeKernel& chi_inv,
                                       const TwoTimeKernel& rigidity) {
    return sum_noise_commutator(chi_inv, rigidity) + 2.0 * antisymmetric_part(chi_inv);
}

/// <(integral Phi F)^2> = Phi^T B Phi dt^2. Covariances are PSD, so a
/// negative value beyond round-off is an error.
inline double filtered_variance(const TwoTimeKernel& covariance, const TimeSeries& filter) {
    require_same_grid(covariance.grid(), filter.grid(), "filtered_variance");
    const double dt = covariance.grid().dt();
    const double v =
        filter.values().dot(covariance.values() * filter.values()) * dt * dt;
    const double scale =
        covariance.values().norm() * filter.values().squaredNorm() * dt * dt;
    if (v < -1e-10 * scale)
        throw numeric_error("filtered_variance: covariance quadratic form is negative (" +
                            std::to_string(v) + ")");
    return std::max(v, 0.0);
}

/// Signal-to-noise ratio of matched filtering against the sum and thermal
/// noises. A vanishing total variance is reported as an error, not infinity:
/// the noiseless limit is a limit statement, finite runs stay finite.
inline double snr(const TimeSeries& signal, const TimeSeries& filter,
                  const TwoTimeKernel& b_sum, const TwoTimeKernel& b_thermal) {
    require_same_grid(signal.grid(), filter.grid(), "snr");
    const double dt = signal.grid().dt();
    const double overlap = filter.values().dot(signal.values()) * dt;
    const double total =
        filtered_variance(b_sum, filter) + filtered_variance(b_thermal, filter);
    if (!(total > 0.0))
        throw numeric_error("snr: total filtered variance is zero (noiseless divergence)");
    return overlap * overlap / total;
}

/// Standard quantum limit curve: hbar |chi^-1(Omega)|.
inline SpectralDensity sql_curve(const SpectralDensity& chi_inv_spectrum,
                                 double hbar = default_hbar) {
    Eigen::VectorXcd v(chi_inv_spectrum.size());
    for (int j = 0; j < chi_inv_spectrum.size(); ++j)
        v[j] = hbar * std::abs(chi_inv_spectrum[j]);
    return SpectralDensity(chi_inv_spectrum.omegas(), std::move(v));
}

/// Dissipative quantum limit curve: hbar |Im chi^-1(Omega)|. Never exceeds
/// the SQL.
inline SpectralDensity dql_curve(const SpectralDensity& chi_inv_spectrum,
                                 double hbar = default_hbar) {
    Eigen::VectorXcd v(chi_inv_spectrum.size());
    for (int j = 0; j < chi_inv_spectrum.size(); ++j)
        v[j] = hbar * std::abs(chi_inv_spectrum[j].imag());
    return SpectralDensity(chi_inv_spectrum.omegas(), std::move(v));
}

namespace detail {

inline void require_same_omegas(const SpectralDensity& a, const SpectralDensity& b,
                                const char* where) {
    if (a.size() != b.size())
        throw validation_error(std::string(where) + ": frequency sets differ in size");
    const double scale = std::max(std::abs(a.omegas()[0]),
                                  std::abs(a.omegas()[a.size() - 1]));
    for (int j = 0; j < a.size(); ++j)
        if (std::abs(a.omegas()[j] - b.omegas()[j]) > 1e-12 * scale)
            throw validation_error(std::string(where) + ": frequency sets differ");
}

} // namespace detail

/// Closed-form stationary sum-noise spectrum:
///   S_sum = |chiK^-1|^2 S_xx + 2 Re(chiK^-1 S_xF) + S_FF.
inline SpectralDensity stationary_sum_spectrum(const SpectralDensity& sxx,
                                               const SpectralDensity& sff,
                                               const SpectralDensity& sxf,
                                               const SpectralDensity& chiK_inv_spectrum) {
    detail::require_same_omegas(sxx, sff, "stationary_sum_spectrum");
    detail::require_same_omegas(sxx, sxf, "stationary_sum_spectrum");
    detail::require_same_omegas(sxx, chiK_inv_spectrum, "stationary_sum_spectrum");
    Eigen::VectorXcd v(sxx.size());
    for (int j = 0; j < sxx.size(); ++j) {
        const std::complex<double> chi = chiK_inv_spectrum[j];
        v[j] = std::norm(chi) * sxx[j].real() + 2.0 * std::real(chi * sxf[j]) +
               sff[j].real();
    }
    return SpectralDensity(sxx.omegas(), std::move(v));
}

/// Commutators of a set of filtered sum-noise observables, as the real
/// antisymmetric matrix C with [F_j, F_k] = i hbar C_jk:
///   C_jk = -2 integral Phi_j chi_a^-1 Phi_k dt dt'.
inline Eigen::MatrixXd multi_filter_commutators(const std::vector<TimeSeries>& filters,
                                                const TwoTimeKernel& chi_a_inv) {
    if (filters.empty())
        throw validation_error("multi_filter_commutators: need at least one filter");
    const int j_count = static_cast<int>(filters.size());
    for (const auto& f : filters)
        require_same_grid(f.grid(), chi_a_inv.grid(), "multi_filter_commutators");
    const double dt = chi_a_inv.grid().dt();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(j_count, j_count);
    for (int j = 0; j < j_count; ++j) {
        for (int k = j + 1; k < j_count; ++k) {
            const double integral =
                filters[j].values().dot(chi_a_inv.values() * filters[k].values()) * dt * dt;
            c(j, k) = -2.0 * integral;
            c(k, j) = -c(j, k);
        }
    }
    return c;
}

/// Pairwise variance-product bounds implied by the commutators:
///   <F_j^2><F_k^2> >= hbar^2 (integral Phi_j chi_a^-1 Phi_k)^2
///                   = (hbar C_jk / 2)^2.
/// Symmetric with zero diagonal; identically zero when chi_a^-1 vanishes.
inline Eigen::MatrixXd pairwise_bounds(const std::vector<TimeSeries>& filters,
                                       const TwoTimeKernel& chi_a_inv,
                                       double hbar = default_hbar) {
    const Eigen::MatrixXd c = multi_filter_commutators(filters, chi_a_inv);
    const int j_count = static_cast<int>(c.rows());
    Eigen::MatrixXd bounds = Eigen::MatrixXd::Zero(j_count, j_count);
    for (int j = 0; j < j_count; ++j) {
        for (int k = j + 1; k < j_count; ++k) {
            const double half = 0.5 * hbar * c(j, k);
            bounds(j, k) = half * half;
            bounds(k, j) = bounds(j, k);
        }
    }
    return bounds;
}

/// Two-quadrature measurement of a narrow-band force at carrier omega0:
/// slow envelopes for the cosine and sine filters plus the friction
/// coefficient H of the stationary dissipation chi_a^-1(Omega) = -i Omega H.
struct QuadratureSpec {
    double omega0 = 0.0;
    TimeSeries envelope_cos;
    TimeSeries envelope_sin;
    double friction = 0.0;

    QuadratureSpec(double omega0_, TimeSeries envelope_cos_, TimeSeries envelope_sin_,
                   double friction_)
        : omega0(omega0_), envelope_cos(std::move(envelope_cos_)),
          envelope_sin(std::move(envelope_sin_)), friction(friction_) {
        require_same_grid(envelope_cos.grid(), envelope_sin.grid(), "QuadratureSpec");
        if (!(omega0 > 0.0))
            throw validation_error("QuadratureSpec: carrier frequency must be positive");
        if (!(friction >= 0.0))
            throw validation_error("QuadratureSpec: friction must be nonnegative");
    }

    const TimeGrid& grid() const { return envelope_cos.grid(); }

    /// Soft contract checks: slow-varying envelopes and a window long
    /// compared to the carrier period. Violations degrade the narrow-band
    /// approximation, they do not make the arithmetic invalid.
    std::vector<std::string> warnings() const {
        std::vector<std::string> out;
        const double window = grid().t_end() - grid().t_start();
        if (omega0 * window < 20.0)
            out.push_back("QuadratureSpec: omega0 * window = " +
                          std::to_string(omega0 * window) +
                          " < 20; narrow-band approximation is unreliable");
        for (const auto* env : {&envelope_cos, &envelope_sin}) {
            const double peak = env->values().cwiseAbs().maxCoeff();
            if (peak == 0.0) continue;
            const double slope = derivative_series(*env).values().cwiseAbs().maxCoeff();
            if (slope > 0.1 * omega0 * peak)
                out.push_back("QuadratureSpec: envelope varies faster than 0.1 * omega0 "
                              "(max |dPhi/dt| = " + std::to_string(slope / peak) +
                              " of peak); envelope is not slow against the carrier");
        }
        if (auto w = window_support_warning(envelope_cos, "cosine envelope")) out.push_back(*w);
        if (auto w = window_support_warning(envelope_sin, "sine envelope")) out.push_back(*w);
        return out;
    }
};

struct NarrowbandBound {
    double exact = 0.0;
    double approx = 0.0;
    double rel_error = 0.0;
    bool degenerate = false;
};

/// The two-quadrature variance-product bound, both as full quadrature of the
/// commutator integral and in the narrow-band closed form
///   (hbar^2 omega0^2 H^2 / 4) (integral Phi_c0 Phi_s0 dt)^2,
/// so the quality of the closed form is a measured quantity.
///
/// The quadrature route uses Phi_c = Phi_c0 cos(omega0 t),
/// Phi_s = Phi_s0 sin(omega0 t) and chi_a^-1 = H d(delta)/dt, differentiating
/// the carrier analytically and the sampled envelope by finite differences.
inline NarrowbandBound narrowband_bound(const QuadratureSpec& spec,
                                        double hbar = default_hbar) {
    const TimeGrid& grid = spec.grid();
    const int n = grid.size();
    const double dt = grid.dt();
    const TimeSeries env_sin_slope = derivative_series(spec.envelope_sin);

    // integral Phi_c(t) * d/dt[Phi_s0(t) sin(omega0 t)] dt
    double q = 0.0;
    double envelope_overlap = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = grid.t(i);
        const double c = std::cos(spec.omega0 * t);
        const double s = std::sin(spec.omega0 * t);
        const double phi_c = spec.envelope_cos[i] * c;
        const double phi_s_dot =
            env_sin_slope[i] * s + spec.omega0 * spec.envelope_sin[i] * c;
        q += phi_c * phi_s_dot;
        envelope_overlap += spec.envelope_cos[i] * spec.envelope_sin[i];
    }
    q *= dt;
    envelope_overlap *= dt;

    NarrowbandBound out;
    const double exact_lin = hbar * spec.friction * q;
    const double approx_lin = 0.5 * hbar * spec.friction * spec.omega0 * envelope_overlap;
    out.exact = exact_lin * exact_lin;
    out.approx = approx_lin * approx_lin;
    if (out.approx > 0.0) {
        out.rel_error = std::abs(out.exact - out.approx) / out.approx;
    } else if (out.exact != 0.0) {
        out.degenerate = true; // orthogonal envelopes: closed form carries no information
        out.rel_error = std::numeric_limits<double>::infinity();
    }
    return out;
}

} // namespace dqlab
