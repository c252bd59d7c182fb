#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "dqlab/kernel.hpp"
#include "dqlab/optimize.hpp"
#include "dqlab/probe.hpp"
#include "dqlab/rng.hpp"
#include "dqlab/time_grid.hpp"
#include "dqlab/waveforms.hpp"

using namespace dqlab;

namespace {

/// Constrained minimum of the stationary sum spectrum for K = 0, derived by
/// KKT analysis of the two-parameter boundary problem. Independent of the
/// numerical solver.
double stationary_minimum_closed_form(std::complex<double> chiK, double budget,
                                      double hbar) {
    const double a = chiK.real();
    const double b = chiK.imag();
    const double chi2 = a * a + b * b;
    if (chi2 == 0.0) return budget;
    if (std::abs(b) * budget >= 0.5 * hbar * chi2) return hbar * std::abs(b);
    return budget * b * b / chi2 + hbar * hbar * chi2 / (4.0 * budget);
}

} // namespace

TEST_CASE("psi function") {
    const TimeGrid grid(0.0, 1.0, 128);
    const TimeSeries phi = waveforms::sampled(waveforms::Gaussian{0.5, 0.08, 1.0}, grid);

    SECTION("scaled delta passes the filter through") {
        const TimeSeries psi = psi_function(phi, 3.0 * delta_kernel(grid));
        for (int i = 0; i < grid.size(); ++i)
            CHECK(psi[i] == Catch::Approx(3.0 * phi[i]).margin(1e-14));
    }

    SECTION("free mass maps the filter to -m phi''") {
        const double mass = 1.7;
        const waveforms::Gaussian shape{0.5, 0.08, 1.0};
        const TimeSeries psi = psi_function(phi, free_mass_response(mass, grid));
        double worst = 0.0;
        for (int i = 4; i < grid.size() - 4; ++i)
            worst = std::max(worst, std::abs(psi[i] + mass * shape.second_derivative(grid.t(i))));
        const double scale = mass / (0.08 * 0.08); // max |m phi''| order
        CHECK(worst < 1e-2 * scale);

        SECTION("second-order convergence against the analytic derivative") {
            const TimeGrid fine(0.0, 1.0, 255);
            const TimeSeries phi_fine = waveforms::sampled(shape, fine);
            const TimeSeries psi_fine = psi_function(phi_fine, free_mass_response(mass, fine));
            double worst_fine = 0.0;
            for (int i = 4; i < fine.size() - 4; ++i)
                worst_fine = std::max(
                    worst_fine, std::abs(psi_fine[i] + mass * shape.second_derivative(fine.t(i))));
            const double ratio = worst / worst_fine;
            CHECK(ratio > 3.2);
            CHECK(ratio < 4.8);
        }
    }

    SECTION("zero filter maps to zero") {
        CHECK(psi_function(TimeSeries::zero(grid), free_mass_response(1.0, grid))
                  .values()
                  .norm() == 0.0);
    }
}

TEST_CASE("memoryless optimum") {
    const TimeGrid grid(0.0, 1.0, 256);
    const double hbar = 1.0;
    const double mass = 1.0;
    const double sigma = 0.08;
    const TimeSeries phi = waveforms::sampled(waveforms::Gaussian{0.5, sigma, 1.0}, grid);
    const TwoTimeKernel chi_inv = free_mass_response(mass, grid);
    const TimeSeries sff = TimeSeries::constant(grid, 0.8);

    const MemorylessOptimum opt = memoryless_optimize(phi, chi_inv, sff, hbar);

    SECTION("substituting the optimum back reproduces the minimum") {
        REQUIRE(opt.capped_points == 0);
        const double direct =
            memoryless_variance(opt.psi, phi, opt.sxx_opt, opt.sxf_opt, sff);
        CHECK(direct == Catch::Approx(opt.min_variance).epsilon(1e-8));
    }

    SECTION("constraint is saturated at every grid point") {
        for (int i = 0; i < grid.size(); ++i) {
            const double product =
                opt.sxx_opt[i] * sff[i] - opt.sxf_opt[i] * opt.sxf_opt[i];
            CHECK(product == Catch::Approx(0.25 * hbar * hbar).epsilon(1e-12));
        }
    }

    SECTION("closed-form value for the Gaussian filter") {
        // (hbar^2 m^2 / 4 S_FF) integral phi''^2 = same * 3 sqrt(pi) / (4 sigma^3)
        const double expected = hbar * hbar * mass * mass / (4.0 * 0.8) * 3.0 *
                                std::sqrt(std::numbers::pi) / (4.0 * sigma * sigma * sigma);
        CHECK(opt.min_variance == Catch::Approx(expected).epsilon(0.01));
    }

    SECTION("budget scaling is exact") {
        const MemorylessOptimum scaled =
            memoryless_optimize(phi, chi_inv, TimeSeries(grid, 4.0 * sff.values()), hbar);
        CHECK(scaled.min_variance == opt.min_variance / 4.0);
    }

    SECTION("filter rescaling leaves the correlation untouched, scales the variance") {
        const MemorylessOptimum rescaled =
            memoryless_optimize(TimeSeries(grid, 2.0 * phi.values()), chi_inv, sff, hbar);
        CHECK((rescaled.sxf_opt.values() - opt.sxf_opt.values()).norm() == 0.0);
        CHECK(rescaled.min_variance == Catch::Approx(4.0 * opt.min_variance).epsilon(1e-14));
    }

    SECTION("nonpositive budget profiles are rejected") {
        CHECK_THROWS_AS(memoryless_optimize(phi, chi_inv, TimeSeries::zero(grid), hbar),
                        validation_error);
    }
}

TEST_CASE("memoryless optimum degeneracies") {
    const TimeGrid grid(0.0, 1.0, 101);
    const double hbar = 1.0;
    const TimeSeries sff = TimeSeries::constant(grid, 1.0);

    SECTION("outside a compactly supported filter the correlation is zero") {
        const TimeSeries phi =
            waveforms::sampled(waveforms::RaisedCosine{0.5, 0.4, 1.0}, grid);
        const MemorylessOptimum opt =
            memoryless_optimize(phi, free_mass_response(1.0, grid), sff, hbar);
        for (int i = 0; i < grid.size(); ++i) {
            if (grid.t(i) < 0.25 || grid.t(i) > 0.75) {
                CHECK(opt.sxf_opt[i] == 0.0);
                CHECK(opt.sxx_opt[i] ==
                      Catch::Approx(0.25 * hbar * hbar / sff[i]).epsilon(1e-14));
            }
        }
    }

    SECTION("Psi zero inside the filter support caps the correlation and flags it") {
        // chi^-1 = diag(t - 0.5)/dt vanishes exactly at the center sample
        const TimeSeries profile =
            TimeSeries::sample(grid, [](double t) { return t - 0.5; });
        const TwoTimeKernel chi_inv = rigidity_kernel(profile);
        const TimeSeries phi = TimeSeries::constant(grid, 1.0);
        const MemorylessOptimum opt = memoryless_optimize(phi, chi_inv, sff, hbar);
        CHECK(opt.degenerate);
        CHECK(opt.capped_points >= 1);
        const int center = grid.size() / 2;
        CHECK(std::abs(opt.sxf_opt[center]) == 1e3 * hbar);
        // constraint still saturated at the capped point
        CHECK(opt.sxx_opt[center] * sff[center] -
                  opt.sxf_opt[center] * opt.sxf_opt[center] ==
              Catch::Approx(0.25 * hbar * hbar).epsilon(1e-12));
    }
}

TEST_CASE("memoryless verification by random perturbation") {
    const TimeGrid grid(0.0, 1.0, 128);
    const double hbar = 1.0;
    const TimeSeries phi = waveforms::sampled(waveforms::Gaussian{0.5, 0.08, 1.0}, grid);
    const TwoTimeKernel chi_inv = free_mass_response(1.0, grid);
    const TimeSeries sff = TimeSeries::constant(grid, 1.0);
    const MemorylessOptimum opt = memoryless_optimize(phi, chi_inv, sff, hbar);

    SECTION("a thousand saturating perturbations never beat the optimum") {
        const VerifyReport report = memoryless_verify(opt, phi, sff, 1000, 2024, hbar);
        CHECK(report.passed);
        CHECK(report.violations == 0);
        CHECK(report.min_margin >= 0.0);
        CHECK(report.max_excess > 0.0);
    }

    SECTION("verification is reproducible bit-exactly from the seed") {
        const VerifyReport r1 = memoryless_verify(opt, phi, sff, 50, 7, hbar);
        const VerifyReport r2 = memoryless_verify(opt, phi, sff, 50, 7, hbar);
        CHECK(r1.min_margin == r2.min_margin);
        CHECK(r1.max_excess == r2.max_excess);
    }

    SECTION("variance excess is quadratic in the perturbation amplitude") {
        Rng rng(99);
        Eigen::VectorXd shape(grid.size());
        for (int i = 0; i < grid.size(); ++i) shape[i] = rng.normal();
        const double base_amp = 0.01 * opt.sxf_opt.values().cwiseAbs().maxCoeff();

        std::vector<double> amps{base_amp, 2.0 * base_amp, 4.0 * base_amp};
        std::vector<double> excesses;
        for (double amp : amps) {
            Eigen::VectorXd sxf = opt.sxf_opt.values() + amp * shape;
            Eigen::VectorXd sxx(grid.size());
            for (int i = 0; i < grid.size(); ++i)
                sxx[i] = (sxf[i] * sxf[i] + 0.25 * hbar * hbar) / sff[i];
            const double value =
                memoryless_variance(opt.psi, phi, TimeSeries(grid, sxx),
                                    TimeSeries(grid, sxf), sff);
            excesses.push_back(value - opt.min_variance);
        }
        // least-squares slope of log(excess) against log(amplitude)
        double sx = 0.0, sy = 0.0, sxy = 0.0, sxx2 = 0.0;
        for (std::size_t k = 0; k < amps.size(); ++k) {
            const double x = std::log(amps[k]);
            const double y = std::log(excesses[k]);
            sx += x;
            sy += y;
            sxy += x * y;
            sxx2 += x * x;
        }
        const double n = static_cast<double>(amps.size());
        const double slope = (n * sxy - sx * sy) / (n * sxx2 - sx * sx);
        CHECK(slope == Catch::Approx(2.0).margin(0.1));
    }
}

TEST_CASE("stationary optimization against the closed form, K = 0") {
    const double hbar = 1.0;
    Rng rng(404);
    for (int trial = 0; trial < 25; ++trial) {
        const std::complex<double> chiK(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
        const double budget = std::exp(rng.uniform(std::log(0.05), std::log(100.0)));
        const StationaryOptimum opt =
            stationary_optimize(chiK, {0.0, 0.0}, budget, 1.0, hbar);
        REQUIRE(opt.feasible);
        const double expected = stationary_minimum_closed_form(chiK, budget, hbar);
        INFO("chiK=" << chiK.real() << "+" << chiK.imag() << "i budget=" << budget);
        CHECK(opt.min_sum_spectrum ==
              Catch::Approx(expected).epsilon(1e-6).margin(1e-9));
        // one-sided floor: never below the dissipative limit
        CHECK(opt.min_sum_spectrum >= hbar * std::abs(chiK.imag()) - 1e-9);
    }
}

TEST_CASE("dissipation-free response has no floor") {
    // Im chiK = 0: the minimum is hbar^2 a^2 / (4 S_FF) and drains to zero
    // with growing budget
    const double hbar = 1.0;
    const std::complex<double> chiK(2.0, 0.0);
    double previous = std::numeric_limits<double>::infinity();
    for (double budget : {1.0, 10.0, 100.0, 1000.0}) {
        const StationaryOptimum opt = stationary_optimize(chiK, {0.0, 0.0}, budget, 1.0, hbar);
        REQUIRE(opt.feasible);
        const double expected = hbar * hbar * 4.0 / (4.0 * budget);
        CHECK(opt.min_sum_spectrum == Catch::Approx(expected).epsilon(1e-6));
        CHECK(opt.min_sum_spectrum < previous);
        previous = opt.min_sum_spectrum;
    }
    CHECK(previous < 1.1e-3);
}

TEST_CASE("stationary optimization recovers the dissipative floor on resonance") {
    const double hbar = 1.0;
    const double mass = 1.0, omega0 = 1.0, gamma = 0.1;
    // chi^-1(omega0) = -i m gamma omega0
    const std::complex<double> chiK(0.0, -mass * gamma * omega0);
    const double dql = hbar * mass * gamma * omega0;

    double previous = std::numeric_limits<double>::infinity();
    for (double factor : {10.0, 100.0, 1000.0, 10000.0}) {
        const StationaryOptimum opt =
            stationary_optimize(chiK, {0.0, 0.0}, factor * dql, omega0, hbar);
        REQUIRE(opt.feasible);
        CHECK(opt.min_sum_spectrum >= dql - 1e-9);
        CHECK(opt.min_sum_spectrum <= previous + 1e-9 * dql);
        previous = opt.min_sum_spectrum;
    }
    CHECK(previous <= 1.01 * dql);
}

TEST_CASE("stationary optimization with rigidity stays above the dissipative floor") {
    const double hbar = 1.0;
    Rng rng(505);
    for (int trial = 0; trial < 100; ++trial) {
        const std::complex<double> chi_inv(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
        const std::complex<double> rigidity(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
        const std::complex<double> chiK = chi_inv + rigidity;
        const double floor_budget = hbar * std::abs(rigidity.imag());
        const double budget = floor_budget + std::exp(rng.uniform(std::log(0.1), std::log(1000.0)));
        const StationaryOptimum opt = stationary_optimize(chiK, rigidity, budget, 1.0, hbar);
        REQUIRE(opt.feasible);
        const double dql = hbar * std::abs(chi_inv.imag());
        INFO("chiK=" << chiK.real() << "," << chiK.imag() << " K=" << rigidity.real() << ","
                     << rigidity.imag() << " budget=" << budget);
        CHECK(opt.min_sum_spectrum >= dql - 1e-9 * (1.0 + dql));
    }
}

TEST_CASE("stationary optimization edge cases") {
    const double hbar = 1.0;

    SECTION("infeasible budget is reported, not computed") {
        const StationaryOptimum opt =
            stationary_optimize({1.0, 1.0}, {0.0, 2.0}, 1.5 * hbar, 1.0, hbar);
        CHECK_FALSE(opt.feasible);
    }

    SECTION("vanishing response leaves only the back-action budget") {
        const StationaryOptimum opt = stationary_optimize({0.0, 0.0}, {0.0, 0.0}, 3.0, 1.0, hbar);
        CHECK(opt.feasible);
        CHECK(opt.min_sum_spectrum == 3.0);
    }

    SECTION("deterministic across repeated calls") {
        const std::complex<double> chiK(0.7, -1.3);
        const StationaryOptimum a = stationary_optimize(chiK, {0.2, 0.4}, 5.0, 1.0, hbar);
        const StationaryOptimum b = stationary_optimize(chiK, {0.2, 0.4}, 5.0, 1.0, hbar);
        CHECK(a.min_sum_spectrum == b.min_sum_spectrum);
        CHECK(a.sxx == b.sxx);
        CHECK(a.sxf == b.sxf);
    }

    SECTION("rejects nonpositive budgets") {
        CHECK_THROWS_AS(stationary_optimize({1.0, 0.0}, {0.0, 0.0}, 0.0, 1.0, hbar),
                        validation_error);
    }
}
