#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "dqlab/analysis.hpp"
#include "dqlab/kernel.hpp"
#include "dqlab/noise.hpp"
#include "dqlab/optimize.hpp"
#include "dqlab/probe.hpp"
#include "dqlab/rng.hpp"
#include "dqlab/spectral.hpp"
#include "dqlab/time_grid.hpp"
#include "dqlab/waveforms.hpp"

using namespace dqlab;

namespace {

TwoTimeKernel random_kernel(const TimeGrid& grid, Rng& rng, double scale = 1.0) {
    Eigen::MatrixXd m(grid.size(), grid.size());
    for (int i = 0; i < grid.size(); ++i)
        for (int j = 0; j < grid.size(); ++j) m(i, j) = rng.uniform(-scale, scale);
    return TwoTimeKernel(grid, std::move(m));
}

} // namespace

TEST_CASE("sum noise covariance reduces to B_FF without imprecision noise") {
    const TimeGrid grid(0.0, 1.0, 32);
    Rng rng(17);
    TwoTimeKernel bff = symmetric_part(random_kernel(grid, rng));
    const NoiseCovariances noise(TwoTimeKernel::zero(grid), bff, TwoTimeKernel::zero(grid),
                                 TwoTimeKernel::zero(grid));
    const TwoTimeKernel chiK = random_kernel(grid, rng);
    CHECK(relative_error(sum_noise_covariance(noise, chiK), bff) < 1e-14);
}

TEST_CASE("memoryless sum covariance matches the 1-D variance integrand") {
    const TimeGrid grid(0.0, 1.0, 96);
    const TimeSeries sxx = TimeSeries::sample(grid, [](double t) { return 0.6 + 0.2 * t; });
    const TimeSeries sff =
        TimeSeries::sample(grid, [](double t) { return 1.1 - 0.3 * t * t; });
    const TimeSeries sxf =
        TimeSeries::sample(grid, [](double t) { return 0.2 * std::sin(6.0 * t); });
    const MemorylessNoise noise(sxx, sff, sxf);
    const TwoTimeKernel chi_inv = free_mass_response(1.4, grid);
    const TimeSeries phi =
        waveforms::sampled(waveforms::Gaussian{0.5, 0.07, 1.0}, grid);

    const TwoTimeKernel b_sum = sum_noise_covariance(memoryless_covariances(noise), chi_inv);
    const double via_matrix = filtered_variance(b_sum, phi);

    const TimeSeries psi = psi_function(phi, chi_inv);
    const double via_integrand = memoryless_variance(psi, phi, sxx, sxf, sff);
    CHECK(via_matrix == Catch::Approx(via_integrand).epsilon(1e-10));
}

TEST_CASE("sum noise commutator identities") {
    const TimeGrid grid(0.0, 1.0, 64);

    SECTION("free mass has no interior commutator for any rigidity") {
        Rng rng(23);
        const TwoTimeKernel chi_inv = free_mass_response(1.0, grid);
        const TwoTimeKernel rigidity = random_kernel(grid, rng);
        const TwoTimeKernel c = sum_noise_commutator(chi_inv, rigidity);
        const int n = grid.size();
        CHECK(c.values().block(4, 4, n - 8, n - 8).norm() == 0.0);
    }

    SECTION("damped oscillator gives -2 H d(delta)/dt in the interior") {
        const double mass = 1.0, omega0 = 1.0, gamma = 0.35;
        const TimeGrid wide(0.0, 20.0, 128);
        const TwoTimeKernel c = sum_noise_commutator(
            damped_oscillator_response(mass, omega0, gamma, wide), TwoTimeKernel::zero(wide));
        const TwoTimeKernel expected =
            -2.0 * velocity_damping_kernel(mass * gamma, wide);
        const int n = wide.size();
        CHECK((c.values() - expected.values()).block(4, 4, n - 8, n - 8).cwiseAbs().maxCoeff() <=
              1e-10 * max_abs(expected));
    }

    SECTION("the two routes agree for arbitrary kernels, rigidity cancels") {
        Rng rng(31);
        for (int trial = 0; trial < 20; ++trial) {
            const TwoTimeKernel chi_inv = random_kernel(grid, rng);
            const TwoTimeKernel rigidity = random_kernel(grid, rng, 3.0);
            CHECK(sum_noise_commutator_mismatch(chi_inv, rigidity) <= 1e-12);
            const TwoTimeKernel c = sum_noise_commutator(chi_inv, rigidity);
            CHECK(relative_error(c, -2.0 * antisymmetric_part(chi_inv)) == 0.0);
        }
    }
}

TEST_CASE("output commutator vanishes for dissipative probes") {
    const TimeGrid grid(0.0, 1.0, 48);
    Rng rng(5);

    SECTION("free mass") {
        const TwoTimeKernel out =
            output_commutator(free_mass_response(1.0, grid), TwoTimeKernel::zero(grid));
        CHECK(frobenius_norm(out) == 0.0);
    }
    SECTION("damped oscillator, exact cancellation") {
        const TwoTimeKernel out = output_commutator(
            damped_oscillator_response(1.0, 1.0, 0.4, grid), TwoTimeKernel::zero(grid));
        CHECK(frobenius_norm(out) == 0.0);
    }
    SECTION("random dissipative kernels") {
        for (int trial = 0; trial < 10; ++trial) {
            const TwoTimeKernel chi_inv = random_kernel(grid, rng);
            const TwoTimeKernel rigidity = random_kernel(grid, rng);
            const TwoTimeKernel out = output_commutator(chi_inv, rigidity);
            CHECK(frobenius_norm(out) <= 1e-12 * frobenius_norm(chi_inv));
        }
    }
}

TEST_CASE("filtered variance") {
    const TimeGrid grid(-3.0, 3.0, 401);

    SECTION("white covariance with a normalized filter returns the level") {
        const double s0 = 2.2;
        TimeSeries phi = waveforms::sampled(waveforms::Gaussian{0.0, 0.35, 1.0}, grid);
        const double norm2 = phi.values().squaredNorm() * grid.dt();
        phi = TimeSeries(grid, phi.values() / std::sqrt(norm2));
        CHECK(filtered_variance(s0 * delta_kernel(grid), phi) ==
              Catch::Approx(s0).epsilon(1e-12));
    }

    SECTION("zero filter gives zero") {
        CHECK(filtered_variance(delta_kernel(grid), TimeSeries::zero(grid)) == 0.0);
    }

    SECTION("Gaussian filter against exponential correlations has a closed form") {
        const double sigma2 = 0.9;
        const double lambda = 1.5;
        const double s = 0.35;
        Eigen::MatrixXd m(grid.size(), grid.size());
        for (int i = 0; i < grid.size(); ++i)
            for (int j = 0; j < grid.size(); ++j)
                m(i, j) = sigma2 * std::exp(-lambda * std::abs(grid.t(i) - grid.t(j)));
        const TimeSeries phi = waveforms::sampled(waveforms::Gaussian{0.0, s, 1.0}, grid);
        const double got = filtered_variance(TwoTimeKernel(grid, m), phi);
        // integral integral phi(t) sigma^2 e^{-lambda|t-t'|} phi(t') dt dt'
        //   = 2 pi sigma^2 s^2 e^{lambda^2 s^2} erfc(lambda s)
        const double expected = 2.0 * std::numbers::pi * sigma2 * s * s *
                                std::exp(lambda * lambda * s * s) * std::erfc(lambda * s);
        CHECK(got == Catch::Approx(expected).epsilon(1e-4));
    }

    SECTION("indefinite quadratic forms are refused") {
        Eigen::MatrixXd bad = -Eigen::MatrixXd::Identity(grid.size(), grid.size());
        CHECK_THROWS_AS(
            filtered_variance(TwoTimeKernel(grid, bad), TimeSeries::constant(grid, 1.0)),
            numeric_error);
    }
}

TEST_CASE("snr") {
    const TimeGrid grid(0.0, 1.0, 128);
    const TimeSeries fsig =
        waveforms::sampled(waveforms::SineGaussian{0.5, 0.08, 40.0, 0.0, 1.0}, grid);
    const TwoTimeKernel white = 1.7 * delta_kernel(grid);
    const TwoTimeKernel none = thermal_covariance(grid);

    SECTION("zero signal or orthogonal filter gives zero") {
        CHECK(snr(TimeSeries::zero(grid), fsig, white, none) == 0.0);
        // sine-Gaussian is odd about t0, the Gaussian filter is even
        const TimeSeries phi = waveforms::sampled(waveforms::Gaussian{0.5, 0.08, 1.0}, grid);
        const double overlap_free = snr(fsig, phi, white, none);
        const double matched = snr(fsig, fsig, white, none);
        CHECK(overlap_free < 1e-20 * matched);
    }

    SECTION("matched filter in white noise gives (integral F^2)/S0") {
        const double expected = fsig.values().squaredNorm() * grid.dt() / 1.7;
        CHECK(snr(fsig, fsig, white, none) == Catch::Approx(expected).epsilon(1e-12));
    }

    SECTION("thermal noise adds to the denominator") {
        const TwoTimeKernel thermal = thermal_covariance_white(0.5, grid);
        const double with_thermal = snr(fsig, fsig, white, thermal);
        const double expected = fsig.values().squaredNorm() * grid.dt() / (1.7 + 0.5);
        CHECK(with_thermal == Catch::Approx(expected).epsilon(1e-12));
    }

    SECTION("noiseless divergence is an error, not infinity") {
        CHECK_THROWS_AS(snr(fsig, fsig, TwoTimeKernel::zero(grid), none), numeric_error);
    }
}

TEST_CASE("SQL and DQL curves") {
    const TimeGrid grid(0.0, 10.0, 64);
    const Eigen::VectorXd omegas = spectral_grid(grid);
    const double hbar = 1.0;

    SECTION("free mass: SQL = hbar m Omega^2 exactly, DQL vanishes") {
        const double mass = 1.3;
        const SpectralDensity chi = free_mass_spectrum(mass, omegas);
        const SpectralDensity sql = sql_curve(chi, hbar);
        const SpectralDensity dql = dql_curve(chi, hbar);
        for (int j = 0; j < sql.size(); ++j) {
            const double om = omegas[j];
            CHECK(sql[j].real() == hbar * std::abs(mass * (om * om)));
            CHECK(dql[j].real() == 0.0);
        }
    }

    SECTION("lossless oscillator SQL vanishes on resonance") {
        const SpectralDensity chi =
            damped_oscillator_spectrum(1.0, 2.0, 0.0, (Eigen::VectorXd(1) << 2.0).finished());
        CHECK(sql_curve(chi, hbar)[0].real() == 0.0);
    }

    SECTION("damped oscillator: DQL = hbar m gamma |Omega| exactly") {
        const double mass = 1.0, omega0 = 1.0, gamma = 0.25;
        const SpectralDensity chi = damped_oscillator_spectrum(mass, omega0, gamma, omegas);
        const SpectralDensity dql = dql_curve(chi, hbar);
        for (int j = 0; j < dql.size(); ++j)
            CHECK(dql[j].real() == hbar * std::abs(mass * gamma * omegas[j]));
    }

    SECTION("DQL never exceeds SQL") {
        Rng rng(99);
        Eigen::VectorXd oms(1000);
        for (int j = 0; j < 1000; ++j) oms[j] = -50.0 + 0.1 * j + rng.uniform(0.0, 0.05);
        std::sort(oms.data(), oms.data() + oms.size());
        const SpectralDensity chi = SpectralDensity::sample(oms, [&](double) {
            return std::complex<double>(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0));
        });
        const SpectralDensity sql = sql_curve(chi, hbar);
        const SpectralDensity dql = dql_curve(chi, hbar);
        for (int j = 0; j < chi.size(); ++j)
            CHECK(dql[j].real() <= sql[j].real());
    }
}

TEST_CASE("stationary sum spectrum") {
    const TimeGrid grid(0.0, 8.0, 128);
    const Eigen::VectorXd omegas = spectral_grid(grid);

    const auto sxx_fn = [](double om) { return 2.0 * 8.0 * 0.3 / (64.0 + om * om); };
    const auto sff_fn = [](double om) { return 2.0 * 7.0 * 0.5 / (49.0 + om * om); };
    const auto sxf_fn = [](double om) { return 2.0 * 9.0 * 0.1 / (81.0 + om * om); };
    // dissipative response with an odd part that is periodic across the
    // frequency wrap, so its kernel keeps exponential tails
    const double dt = grid.dt();
    const auto chi_fn = [dt](double om) {
        return std::complex<double>(
            1.0 + 0.8 * 2.0 * 7.0 / (49.0 + om * om),
            std::sin(om * dt) / dt * 0.5 * 2.0 * 7.0 / (49.0 + om * om));
    };

    const SpectralDensity sxx = sample_spectrum(grid, sxx_fn);
    const SpectralDensity sff = sample_spectrum(grid, sff_fn);
    const SpectralDensity sxf = sample_spectrum(grid, sxf_fn);
    const SpectralDensity chiK = sample_spectrum(grid, chi_fn);

    SECTION("no imprecision noise leaves S_FF") {
        const SpectralDensity zero = sample_spectrum(grid, [](double) { return 0.0; });
        const SpectralDensity s = stationary_sum_spectrum(zero, sff, zero, chiK);
        for (int j = 0; j < s.size(); ++j)
            CHECK(s[j].real() == Catch::Approx(sff[j].real()).epsilon(1e-14));
    }

    SECTION("anti-correlation cancels the correlated part") {
        // S_xF = -conj(chiK) S_xx gives S_FF - |chiK|^2 S_xx
        const SpectralDensity tuned = SpectralDensity::sample(
            omegas, [&](double om) { return -std::conj(chi_fn(om)) * sxx_fn(om); });
        const SpectralDensity s = stationary_sum_spectrum(sxx, sff, tuned, chiK);
        for (int j = 0; j < s.size(); ++j) {
            const double expected =
                sff[j].real() - std::norm(chi_fn(omegas[j])) * sxx[j].real();
            CHECK(s[j].real() == Catch::Approx(expected).margin(1e-12));
        }
    }

    SECTION("time-domain composition route agrees at interior frequencies") {
        const NoiseCovariances cov = stationary_covariances(sxx, sff, sxf, grid);
        const TwoTimeKernel chiK_kernel = toeplitz_from_spectrum(chiK, grid);
        const TwoTimeKernel b_sum = sum_noise_covariance(cov, chiK_kernel);
        const SpectralDensity via_time = kernel_to_spectrum(b_sum, 24);
        const SpectralDensity closed = stationary_sum_spectrum(sxx, sff, sxf, chiK);
        const int m = closed.size();
        for (int j = m / 4; j < 3 * m / 4; ++j) {
            CHECK(std::abs(via_time[j] - closed[j]) <= 1e-4 * std::abs(closed[j]));
        }
    }
}

TEST_CASE("multi-filter commutators and pairwise bounds") {
    const TimeGrid grid(0.0, 1.0, 512);
    const double hbar = 1.0;

    SECTION("a single filter commutes with itself") {
        const std::vector<TimeSeries> one{
            waveforms::sampled(waveforms::Gaussian{0.5, 0.1, 1.0}, grid)};
        const Eigen::MatrixXd c =
            multi_filter_commutators(one, delta_derivative_kernel(grid));
        REQUIRE(c.rows() == 1);
        CHECK(c(0, 0) == 0.0);
    }

    SECTION("identical filters commute") {
        const TimeSeries phi = waveforms::sampled(waveforms::Gaussian{0.5, 0.1, 1.0}, grid);
        const Eigen::MatrixXd c =
            multi_filter_commutators({phi, phi}, delta_derivative_kernel(grid));
        CHECK(std::abs(c(0, 1)) < 1e-12 * phi.values().squaredNorm() * grid.dt());
    }

    SECTION("quadrature filters against velocity damping") {
        const double omega0 = 60.0;
        const double friction = 0.8;
        const waveforms::Gaussian env{0.5, 0.08, 1.0};
        const TimeSeries phi_c = TimeSeries::sample(
            grid, [&](double t) { return env(t) * std::cos(omega0 * t); });
        const TimeSeries phi_s = TimeSeries::sample(
            grid, [&](double t) { return env(t) * std::sin(omega0 * t); });
        const TwoTimeKernel chi_a = velocity_damping_kernel(friction, grid);
        const Eigen::MatrixXd c = multi_filter_commutators({phi_c, phi_s}, chi_a);

        CHECK(c(0, 1) == -c(1, 0));
        CHECK(c(0, 0) == 0.0);
        CHECK(c(1, 1) == 0.0);

        double env2 = 0.0;
        for (int i = 0; i < grid.size(); ++i) env2 += env(grid.t(i)) * env(grid.t(i));
        env2 *= grid.dt();
        CHECK(std::abs(c(0, 1)) == Catch::Approx(omega0 * friction * env2).epsilon(0.02));

        SECTION("bounds are the squared half-commutators") {
            const Eigen::MatrixXd bounds =
                pairwise_bounds({phi_c, phi_s}, chi_a, hbar);
            CHECK(bounds(0, 1) == bounds(1, 0));
            CHECK(bounds(0, 0) == 0.0);
            const double half = 0.5 * hbar * c(0, 1);
            CHECK(bounds(0, 1) == half * half);
        }
    }

    SECTION("no dissipation, no bound") {
        const TimeSeries phi_a = waveforms::sampled(waveforms::Gaussian{0.4, 0.05, 1.0}, grid);
        const TimeSeries phi_b = waveforms::sampled(waveforms::Gaussian{0.6, 0.05, 1.0}, grid);
        CHECK(pairwise_bounds({phi_a, phi_b}, TwoTimeKernel::zero(grid), hbar).norm() == 0.0);
    }
}

TEST_CASE("narrowband two-quadrature bound") {
    const TimeGrid grid(0.0, 1.0, 512);
    const double hbar = 1.0;

    SECTION("zero sine envelope kills both routes") {
        const QuadratureSpec spec(50.0,
                                  waveforms::sampled(waveforms::Gaussian{0.5, 0.08, 1.0}, grid),
                                  TimeSeries::zero(grid), 1.0);
        const NarrowbandBound out = narrowband_bound(spec, hbar);
        CHECK(out.exact == 0.0);
        CHECK(out.approx == 0.0);
        CHECK(out.rel_error == 0.0);
        CHECK_FALSE(out.degenerate);
    }

    SECTION("Gaussian envelopes at omega0 T = 100 sit within 5 percent") {
        const TimeSeries env = waveforms::sampled(waveforms::Gaussian{0.5, 0.08, 1.0}, grid);
        const QuadratureSpec spec(100.0, env, env, 1.0);
        const NarrowbandBound out = narrowband_bound(spec, hbar);
        CHECK(out.rel_error <= 0.05);
        CHECK(out.exact > 0.0);
    }

    SECTION("doubling the friction multiplies both by exactly four") {
        const TimeSeries env = waveforms::sampled(waveforms::Gaussian{0.5, 0.08, 1.0}, grid);
        const QuadratureSpec spec1(40.0, env, env, 0.7);
        const QuadratureSpec spec2(40.0, env, env, 1.4);
        const NarrowbandBound b1 = narrowband_bound(spec1, hbar);
        const NarrowbandBound b2 = narrowband_bound(spec2, hbar);
        CHECK(b2.exact == 4.0 * b1.exact);
        CHECK(b2.approx == 4.0 * b1.approx);
    }

    SECTION("exact quadrature agrees with the stencil pairwise bound") {
        const double omega0 = 60.0;
        const TimeSeries env = waveforms::sampled(waveforms::Gaussian{0.5, 0.08, 1.0}, grid);
        const QuadratureSpec spec(omega0, env, env, 0.9);
        const NarrowbandBound out = narrowband_bound(spec, hbar);

        const TimeSeries filter_c = TimeSeries::sample(
            grid, [&](double t) {
                return waveforms::Gaussian{0.5, 0.08, 1.0}(t) * std::cos(omega0 * t);
            });
        const TimeSeries filter_s = TimeSeries::sample(
            grid, [&](double t) {
                return waveforms::Gaussian{0.5, 0.08, 1.0}(t) * std::sin(omega0 * t);
            });
        const Eigen::MatrixXd bounds = pairwise_bounds(
            {filter_c, filter_s}, velocity_damping_kernel(0.9, grid), hbar);
        const double budget = 3.0 * (omega0 * grid.dt()) * (omega0 * grid.dt());
        CHECK(bounds(0, 1) == Catch::Approx(out.exact).epsilon(budget));
    }

    SECTION("disjoint-at-a-point envelopes flag the degenerate closed form") {
        const TimeSeries env_c =
            waveforms::sampled(waveforms::RaisedCosine{0.3, 0.4, 1.0}, grid);
        const TimeSeries env_s =
            waveforms::sampled(waveforms::RaisedCosine{0.7, 0.4, 1.0}, grid);
        const QuadratureSpec spec(100.0, env_c, env_s, 1.0);
        const NarrowbandBound out = narrowband_bound(spec, hbar);
        CHECK(out.approx == 0.0);
        CHECK(out.exact != 0.0);
        CHECK(out.degenerate);
    }

    SECTION("contract warnings fire when the carrier is too slow or envelopes too fast") {
        const TimeSeries env = waveforms::sampled(waveforms::Gaussian{0.5, 0.02, 1.0}, grid);
        const QuadratureSpec slow(10.0, env, env, 1.0);
        CHECK_FALSE(slow.warnings().empty());

        const TimeSeries wide = waveforms::sampled(waveforms::Gaussian{0.5, 0.08, 1.0}, grid);
        const QuadratureSpec fine(100.0, wide, wide, 1.0);
        CHECK(fine.warnings().empty());
    }
}
