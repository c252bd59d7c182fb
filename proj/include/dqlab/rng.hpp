#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace dqlab {

/// Seeded pseudo-random generator with fully pinned output: std::mt19937_64
/// (64-bit state, specified bit-exactly by the standard) mapped to doubles
/// in-house. std::normal_distribution is implementation-defined, so normal
/// deviates use an explicit Box-Muller transform instead; identical seeds
/// give identical streams on any conforming platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller on (0,1] x [0,1) uniforms.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace dqlab
