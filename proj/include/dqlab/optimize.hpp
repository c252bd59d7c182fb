#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dqlab/errors.hpp"
#include "dqlab/kernel.hpp"
#include "dqlab/rng.hpp"
#include "dqlab/time_grid.hpp"

namespace dqlab {

/// Psi(t) = integral Phi(t') chi^-1(t',t) dt' — the filter propagated through
/// the transposed response kernel.
inline TimeSeries psi_function(const TimeSeries& filter, const TwoTimeKernel& chi_inv) {
    require_same_grid(filter.grid(), chi_inv.grid(), "psi_function");
    Eigen::VectorXd v =
        (chi_inv.values().transpose() * filter.values()) * filter.grid().dt();
    return TimeSeries(filter.grid(), std::move(v));
}

/// The memoryless filtered sum-noise variance functional
///   integral (Psi^2 S_xx + 2 Psi Phi S_xF + Phi^2 S_FF) dt.
inline double memoryless_variance(const TimeSeries& psi, const TimeSeries& phi,
                                  const TimeSeries& sxx, const TimeSeries& sxf,
                                  const TimeSeries& sff) {
    require_same_grid(psi.grid(), phi.grid(), "memoryless_variance");
    require_same_grid(psi.grid(), sxx.grid(), "memoryless_variance");
    require_same_grid(psi.grid(), sxf.grid(), "memoryless_variance");
    require_same_grid(psi.grid(), sff.grid(), "memoryless_variance");
    double acc = 0.0;
    for (int i = 0; i < psi.size(); ++i)
        acc += psi[i] * psi[i] * sxx[i] + 2.0 * psi[i] * phi[i] * sxf[i] +
               phi[i] * phi[i] * sff[i];
    return acc * psi.grid().dt();
}

/// Closed-form optimum of the memoryless meter for a fixed filter.
/// The uncertainty constraint is saturated at every grid point:
/// S_xx S_FF - S_xF^2 = hbar^2/4.
struct MemorylessOptimum {
    TimeSeries sxf_opt;
    TimeSeries sxx_opt;
    TimeSeries psi;
    double min_variance = 0.0;
    /// Points where Psi = 0 but Phi != 0: the closed form diverges there and
    /// the correlation is capped instead; the reported minimum no longer
    /// binds at such points.
    int capped_points = 0;
    bool degenerate = false;
};

/// Minimize the memoryless variance functional over correlation profiles
/// with S_FF fixed and the pointwise uncertainty constraint saturated.
/// The optimum is S_xF = -(Phi/Psi) S_FF with minimum
/// (hbar^2/4) integral Psi^2 / S_FF dt.
inline MemorylessOptimum memoryless_optimize(const TimeSeries& filter,
                                             const TwoTimeKernel& chi_inv,
                                             const TimeSeries& sff,
                                             double hbar = default_hbar,
                                             double correlation_cap_in_hbar = 1e3) {
    require_same_grid(filter.grid(), sff.grid(), "memoryless_optimize");
    for (int i = 0; i < sff.size(); ++i)
        if (!(sff[i] > 0.0))
            throw validation_error("memoryless_optimize: S_FF must be positive everywhere");

    const TimeSeries psi = psi_function(filter, chi_inv);
    const int n = filter.size();
    const double cap = correlation_cap_in_hbar * hbar;
    const double quarter_h2 = 0.25 * hbar * hbar;

    Eigen::VectorXd sxf(n);
    Eigen::VectorXd sxx(n);
    int capped = 0;
    for (int i = 0; i < n; ++i) {
        double value;
        if (filter[i] == 0.0 && psi[i] == 0.0) {
            value = 0.0; // outside the filter support any saturating value works
        } else {
            value = -(filter[i] / psi[i]) * sff[i];
            if (!std::isfinite(value) || std::abs(value) > cap) {
                value = std::copysign(cap, value);
                ++capped;
            }
        }
        sxf[i] = value;
        sxx[i] = (value * value + quarter_h2) / sff[i];
    }

    double min_variance = 0.0;
    for (int i = 0; i < n; ++i) min_variance += psi[i] * psi[i] / sff[i];
    min_variance *= quarter_h2 * filter.grid().dt();

    MemorylessOptimum out{TimeSeries(filter.grid(), std::move(sxf)),
                          TimeSeries(filter.grid(), std::move(sxx)), psi, min_variance,
                          capped, capped > 0};
    return out;
}

struct VerifyReport {
    int trials = 0;
    int violations = 0;
    double min_margin = 0.0; // smallest (perturbed - optimum), >= 0 at a true minimum
    double max_excess = 0.0;
    bool passed = false;
};

/// Brute-force minimality check: random admissible perturbations of the
/// optimal correlation, with the constraint re-saturated, must never beat
/// the reported minimum.
inline VerifyReport memoryless_verify(const MemorylessOptimum& optimum,
                                      const TimeSeries& filter,
                                      const TimeSeries& sff, int trials,
                                      std::uint64_t seed,
                                      double hbar = default_hbar,
                                      double relative_amplitude = 0.1) {
    const int n = filter.size();
    const double quarter_h2 = 0.25 * hbar * hbar;
    const double base_scale = optimum.sxf_opt.values().cwiseAbs().maxCoeff();
    const double amplitude =
        relative_amplitude * (base_scale > 0.0 ? base_scale : hbar);
    const double slack =
        1e-10 * std::max(optimum.min_variance, quarter_h2);

    Rng rng(seed);
    VerifyReport report;
    report.trials = trials;
    report.min_margin = std::numeric_limits<double>::infinity();

    Eigen::VectorXd sxf(n);
    Eigen::VectorXd sxx(n);
    for (int trial = 0; trial < trials; ++trial) {
        for (int i = 0; i < n; ++i) {
            sxf[i] = optimum.sxf_opt[i] + amplitude * rng.normal();
            sxx[i] = (sxf[i] * sxf[i] + quarter_h2) / sff[i];
        }
        const double value = memoryless_variance(
            optimum.psi, filter, TimeSeries(filter.grid(), sxx),
            TimeSeries(filter.grid(), sxf), sff);
        const double margin = value - optimum.min_variance;
        report.min_margin = std::min(report.min_margin, margin);
        report.max_excess = std::max(report.max_excess, margin);
        if (value < optimum.min_variance - slack) ++report.violations;
    }
    report.passed = report.violations == 0;
    return report;
}

/// Per-frequency minimization of the stationary sum-noise spectrum at a
/// fixed back-action budget S_FF, subject to the spectral uncertainty
/// relation. The minimum approaches hbar |Im chi^-1(Omega)| as the budget
/// grows and never falls below it.
struct StationaryOptimum {
    double omega = 0.0;
    double sff_budget = 0.0;
    double min_sum_spectrum = 0.0;
    double sxx = 0.0;
    std::complex<double> sxf{0.0, 0.0};
    int iterations = 0;
    double residual = 0.0; // constraint saturation defect at the solution
    bool feasible = true;
};

namespace detail {

/// Feasible-radius solver: along direction theta in the (Re S_xF, Im S_xF)
/// plane the constraint reads
///   g(r) = r^2 + hbar |r sin(theta) - q S_xx| - C <= 0,
///   C = S_xx S_FF - hbar^2/4.
/// The feasible set is a (possibly empty) interval [r_lo, r_hi] in r >= 0;
/// the minimum of the linear objective sits at one of its ends.
struct FeasibleRadii {
    bool feasible = false;
    double r_lo = 0.0;
    double r_hi = 0.0;
};

inline FeasibleRadii feasible_radii(double sin_theta, double q_sxx, double capacity,
                                    double hbar) {
    FeasibleRadii out;
    if (capacity < 0.0) return out;

    const auto g = [&](double r) {
        return r * r + hbar * std::abs(r * sin_theta - q_sxx) - capacity;
    };

    std::vector<double> candidates;
    if (g(0.0) <= 0.0) candidates.push_back(0.0);

    // case r sin(theta) >= q S_xx: r^2 + hbar sin(theta) r - (C + hbar q S_xx) = 0
    {
        const double b = hbar * sin_theta;
        const double c = -(capacity + hbar * q_sxx);
        const double disc = b * b - 4.0 * c;
        if (disc >= 0.0) {
            const double sq = std::sqrt(disc);
            for (double r : {0.5 * (-b + sq), 0.5 * (-b - sq)})
                if (r >= 0.0 && r * sin_theta - q_sxx >= -1e-12 * (1.0 + std::abs(q_sxx)))
                    candidates.push_back(r);
        }
    }
    // case r sin(theta) <= q S_xx: r^2 - hbar sin(theta) r + (hbar q S_xx - C) = 0
    {
        const double b = -hbar * sin_theta;
        const double c = hbar * q_sxx - capacity;
        const double disc = b * b - 4.0 * c;
        if (disc >= 0.0) {
            const double sq = std::sqrt(disc);
            for (double r : {0.5 * (-b + sq), 0.5 * (-b - sq)})
                if (r >= 0.0 && r * sin_theta - q_sxx <= 1e-12 * (1.0 + std::abs(q_sxx)))
                    candidates.push_back(r);
        }
    }
    if (candidates.empty()) return out;

    out.r_lo = *std::min_element(candidates.begin(), candidates.end());
    out.r_hi = *std::max_element(candidates.begin(), candidates.end());
    // keep returned radii on the feasible side of round-off
    const double scale = 1.0 + capacity + std::abs(q_sxx) * hbar;
    for (double* r : {&out.r_lo, &out.r_hi}) {
        double defect = g(*r);
        if (defect > 0.0) {
            const double slope =
                2.0 * (*r) + hbar * std::abs(sin_theta) + 1e-30;
            *r = std::max(0.0, *r - defect / slope * (1.0 + 1e-12));
            defect = g(*r);
            if (defect > 1e-9 * scale) return out; // no reliable feasible point
        }
    }
    out.feasible = true;
    return out;
}

/// Deterministic compass pattern search on R^2. Gradient-free and robust at
/// the kinks the constraint's absolute value introduces, where simplex
/// methods stall.
template <class F>
std::pair<Eigen::Vector2d, int> pattern_search_2d(F&& objective, Eigen::Vector2d start,
                                                  double initial_step, double min_step,
                                                  int max_iter) {
    Eigen::Vector2d x = start;
    double fx = objective(x);
    double step = initial_step;
    int iterations = 0;
    while (step > min_step && iterations < max_iter) {
        ++iterations;
        bool improved = false;
        for (const Eigen::Vector2d& dir :
             {Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(-1.0, 0.0),
              Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(0.0, -1.0)}) {
            const Eigen::Vector2d probe = x + step * dir;
            const double fp = objective(probe);
            if (fp < fx) {
                x = probe;
                fx = fp;
                improved = true;
            }
        }
        if (!improved) step *= 0.5;
    }
    return {x, iterations};
}

/// Deterministic Nelder-Mead on R^2.
template <class F>
std::pair<Eigen::Vector2d, int> nelder_mead_2d(F&& objective, Eigen::Vector2d start,
                                               double initial_step, int max_iter,
                                               double x_tol, double f_tol) {
    std::array<Eigen::Vector2d, 3> xs{start, start + Eigen::Vector2d(initial_step, 0.0),
                                      start + Eigen::Vector2d(0.0, initial_step)};
    std::array<double, 3> fs{objective(xs[0]), objective(xs[1]), objective(xs[2])};
    int iterations = 0;

    const auto order = [&]() {
        // insertion sort keeps tie-breaking deterministic
        for (int i = 1; i < 3; ++i)
            for (int j = i; j > 0 && fs[j] < fs[j - 1]; --j) {
                std::swap(fs[j], fs[j - 1]);
                std::swap(xs[j], xs[j - 1]);
            }
    };

    order();
    for (; iterations < max_iter; ++iterations) {
        const double spread = std::abs(fs[2] - fs[0]);
        const double size = std::max((xs[1] - xs[0]).norm(), (xs[2] - xs[0]).norm());
        if (size < x_tol * (1.0 + xs[0].norm()) && spread < f_tol) break;

        const Eigen::Vector2d centroid = 0.5 * (xs[0] + xs[1]);
        const Eigen::Vector2d reflected = centroid + (centroid - xs[2]);
        const double f_reflected = objective(reflected);
        if (f_reflected < fs[0]) {
            const Eigen::Vector2d expanded = centroid + 2.0 * (centroid - xs[2]);
            const double f_expanded = objective(expanded);
            if (f_expanded < f_reflected) {
                xs[2] = expanded;
                fs[2] = f_expanded;
            } else {
                xs[2] = reflected;
                fs[2] = f_reflected;
            }
        } else if (f_reflected < fs[1]) {
            xs[2] = reflected;
            fs[2] = f_reflected;
        } else {
            const Eigen::Vector2d contracted = centroid + 0.5 * (xs[2] - centroid);
            const double f_contracted = objective(contracted);
            if (f_contracted < fs[2]) {
                xs[2] = contracted;
                fs[2] = f_contracted;
            } else {
                for (int i = 1; i < 3; ++i) {
                    xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
                    fs[i] = objective(xs[i]);
                }
            }
        }
        order();
    }
    return {xs[0], iterations};
}

} // namespace detail

inline StationaryOptimum stationary_optimize(std::complex<double> chiK_inv_at_omega,
                                             std::complex<double> rigidity_at_omega,
                                             double sff_budget, double omega,
                                             double hbar = default_hbar) {
    if (!(sff_budget > 0.0))
        throw validation_error("stationary_optimize: budget must be positive");

    StationaryOptimum out;
    out.omega = omega;
    out.sff_budget = sff_budget;

    const double a = chiK_inv_at_omega.real();
    const double b = chiK_inv_at_omega.imag();
    const double q = rigidity_at_omega.imag();
    const double chi2 = a * a + b * b;
    const double inf = std::numeric_limits<double>::infinity();

    // The relation S_xx S_FF - |S_xF|^2 >= hbar |Im S_xF - q S_xx| + hbar^2/4
    // admits a solution iff the budget covers the rigidity commutator.
    if (sff_budget < hbar * std::abs(q)) {
        out.feasible = false;
        out.min_sum_spectrum = inf;
        return out;
    }

    struct Candidate {
        double value = std::numeric_limits<double>::infinity();
        double sxx = 0.0;
        double u = 0.0;
        double v = 0.0;
        double residual = 0.0;
    };
    Candidate best;

    const auto evaluate = [&](const Eigen::Vector2d& x) -> double {
        const double sxx = std::exp(x[0]);
        if (!std::isfinite(sxx)) return inf;
        const double capacity = sxx * sff_budget - 0.25 * hbar * hbar;
        const double theta = x[1];
        const auto radii =
            detail::feasible_radii(std::sin(theta), q * sxx, capacity, hbar);
        if (!radii.feasible) return inf;
        const double dir = a * std::cos(theta) - b * std::sin(theta);
        double value = inf;
        double r_best = 0.0;
        for (double r : {radii.r_lo, radii.r_hi}) {
            const double f = chi2 * sxx + 2.0 * r * dir + sff_budget;
            if (f < value) {
                value = f;
                r_best = r;
            }
        }
        if (value < best.value) {
            best.value = value;
            best.sxx = sxx;
            best.u = r_best * std::cos(theta);
            best.v = r_best * std::sin(theta);
            best.residual = std::abs(r_best * r_best +
                                     hbar * std::abs(r_best * std::sin(theta) - q * sxx) -
                                     capacity);
        }
        return value;
    };

    if (chi2 == 0.0) {
        // the response drops out; any feasible state gives S_sum = S_FF
        const double sxx = (sff_budget > hbar * std::abs(q))
                               ? 0.25 * hbar * hbar / (sff_budget - hbar * std::abs(q))
                               : 1.0;
        out.min_sum_spectrum = sff_budget;
        out.sxx = sxx;
        out.sxf = {0.0, 0.0};
        out.residual = 0.0;
        return out;
    }

    // 27 seeds: 9 log-spaced S_xx scales x 3 directions around the steepest
    // descent angle of the linear term.
    const double s_small = 0.25 * hbar * hbar / sff_budget;
    const double s_large =
        std::max({10.0 * sff_budget / chi2, 1e3 * s_small, hbar / std::sqrt(chi2)});
    const double theta_star = std::atan2(b, -a);
    int total_iterations = 0;
    for (int is = 0; is < 9; ++is) {
        const double frac = static_cast<double>(is) / 8.0;
        const double ln_sxx =
            std::log(s_small) + frac * (std::log(s_large) - std::log(s_small));
        for (int it = 0; it < 3; ++it) {
            const double theta0 =
                theta_star + (static_cast<double>(it) - 1.0) * 2.0943951023931953;
            auto [x, iters] = detail::nelder_mead_2d(
                evaluate, Eigen::Vector2d(ln_sxx, theta0), 0.5, 400, 1e-10, 1e-12);
            (void)x;
            total_iterations += iters;
        }
    }

    if (!std::isfinite(best.value)) {
        out.feasible = false;
        out.min_sum_spectrum = inf;
        return out;
    }

    // Low-budget optima sit on the Im S_xF = 0 kink where the simplex search
    // stalls; polish from the incumbent and from both kink rays.
    {
        const Eigen::Vector2d incumbent(std::log(best.sxx),
                                        std::atan2(best.v, best.u));
        for (const Eigen::Vector2d& start :
             {incumbent, Eigen::Vector2d(incumbent[0], 0.0),
              Eigen::Vector2d(incumbent[0], std::numbers::pi)}) {
            auto [x, iters] =
                detail::pattern_search_2d(evaluate, start, 0.25, 1e-14, 4000);
            (void)x;
            total_iterations += iters;
        }
    }
    out.min_sum_spectrum = best.value;
    out.sxx = best.sxx;
    out.sxf = {best.u, best.v};
    out.iterations = total_iterations;
    out.residual = best.residual;
    return out;
}

} // namespace dqlab
