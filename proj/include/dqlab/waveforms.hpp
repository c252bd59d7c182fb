#pragma once

#include <cmath>
#include <numbers>

#include "dqlab/kernel.hpp"
#include "dqlab/time_grid.hpp"

namespace dqlab {
namespace waveforms {

/// A exp(-(t - t0)^2 / (2 sigma^2))
struct Gaussian {
    double t0 = 0.0;
    double sigma = 1.0;
    double amplitude = 1.0;
    double operator()(double t) const {
        const double z = (t - t0) / sigma;
        return amplitude * std::exp(-0.5 * z * z);
    }
    double second_derivative(double t) const {
        const double z = (t - t0) / sigma;
        return amplitude * (z * z - 1.0) / (sigma * sigma) * std::exp(-0.5 * z * z);
    }
};

/// A exp(-(t - t0)^2 / (2 sigma^2)) sin(omega0 (t - t0) + phase)
struct SineGaussian {
    double t0 = 0.0;
    double sigma = 1.0;
    double omega0 = 1.0;
    double phase = 0.0;
    double amplitude = 1.0;
    double operator()(double t) const {
        const double z = (t - t0) / sigma;
        return amplitude * std::exp(-0.5 * z * z) * std::sin(omega0 * (t - t0) + phase);
    }
};

/// A (1 + cos(2 pi (t - t0) / width)) / 2 on |t - t0| <= width/2, else 0.
struct RaisedCosine {
    double t0 = 0.0;
    double width = 1.0;
    double amplitude = 1.0;
    double operator()(double t) const {
        const double u = t - t0;
        if (std::abs(u) > 0.5 * width) return 0.0;
        return 0.5 * amplitude * (1.0 + std::cos(2.0 * std::numbers::pi * u / width));
    }
};

template <class W>
TimeSeries sampled(const W& w, const TimeGrid& grid) {
    return TimeSeries::sample(grid, [&](double t) { return w(t); });
}

} // namespace waveforms
} // namespace dqlab
