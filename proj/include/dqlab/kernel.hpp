#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "dqlab/errors.hpp"
#include "dqlab/time_grid.hpp"

namespace dqlab {

/// Real sampled function of time on a grid.
class TimeSeries {
public:
    TimeSeries(TimeGrid grid, Eigen::VectorXd values)
        : grid_(std::move(grid)), v_(std::move(values)) {
        if (v_.size() != grid_.size())
            throw validation_error("TimeSeries: length does not match grid");
        if (!v_.allFinite())
            throw validation_error("TimeSeries: non-finite entries");
    }

    static TimeSeries zero(const TimeGrid& grid) {
        return TimeSeries(grid, Eigen::VectorXd::Zero(grid.size()));
    }

    static TimeSeries constant(const TimeGrid& grid, double value) {
        return TimeSeries(grid, Eigen::VectorXd::Constant(grid.size(), value));
    }

    /// Sample a callable f(t) on the grid.
    template <class F>
    static TimeSeries sample(const TimeGrid& grid, F&& f) {
        Eigen::VectorXd v(grid.size());
        for (int k = 0; k < grid.size(); ++k) v[k] = f(grid.t(k));
        return TimeSeries(grid, std::move(v));
    }

    const TimeGrid& grid() const { return grid_; }
    const Eigen::VectorXd& values() const { return v_; }
    double operator[](int k) const { return v_[k]; }
    int size() const { return v_.size(); }

private:
    TimeGrid grid_;
    Eigen::VectorXd v_;
};

/// A real two-time kernel kappa(t,t') sampled as an N x N matrix,
/// values()(i,j) ~ kappa(t_i, t_j).
///
/// The composition convention is rectangle-rule quadrature,
///   (k1 o k2)(i,j) = sum_k M1(i,k) M2(k,j) dt,
/// under which the discrete delta kernel is I/dt and acts as the exact
/// two-sided identity.
///
/// Commutator kernels are stored with the i*hbar prefactor factored out:
/// [A(t), B(t')] = i*hbar*C(t,t') with C real and antisymmetric; only C is
/// kept.
class TwoTimeKernel {
public:
    TwoTimeKernel(TimeGrid grid, Eigen::MatrixXd values)
        : grid_(std::move(grid)), m_(std::move(values)) {
        if (m_.rows() != grid_.size() || m_.cols() != grid_.size())
            throw validation_error("TwoTimeKernel: matrix shape does not match grid");
        if (!m_.allFinite())
            throw validation_error("TwoTimeKernel: non-finite entries");
    }

    static TwoTimeKernel zero(const TimeGrid& grid) {
        const int n = grid.size();
        return TwoTimeKernel(grid, Eigen::MatrixXd::Zero(n, n));
    }

    const TimeGrid& grid() const { return grid_; }
    const Eigen::MatrixXd& values() const { return m_; }
    double operator()(int i, int j) const { return m_(i, j); }
    int size() const { return grid_.size(); }

private:
    TimeGrid grid_;
    Eigen::MatrixXd m_;
};

/// delta(t - t'): the identity of the composition algebra, I/dt.
inline TwoTimeKernel delta_kernel(const TimeGrid& grid) {
    const int n = grid.size();
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) / grid.dt();
    return TwoTimeKernel(grid, std::move(m));
}

/// d/dt of the delta kernel: composing with a series differentiates it.
/// Central differences in the interior, one-sided second-order stencils on
/// the boundary rows, then antisymmetry is enforced structurally via
/// M <- (M - M^T)/2. Exact for linear functions on interior rows.
inline TwoTimeKernel delta_derivative_kernel(const TimeGrid& grid) {
    const int n = grid.size();
    const double dt = grid.dt();
    const double w = 1.0 / (2.0 * dt * dt);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i + 1 < n; ++i) {
        m(i, i + 1) = w;
        m(i, i - 1) = -w;
    }
    // f'(t_0) ~ (-3 f_0 + 4 f_1 - f_2) / (2 dt), mirrored at the far end.
    m(0, 0) = -3.0 * w;
    m(0, 1) = 4.0 * w;
    m(0, 2) = -w;
    m(n - 1, n - 1) = 3.0 * w;
    m(n - 1, n - 2) = -4.0 * w;
    m(n - 1, n - 3) = w;
    Eigen::MatrixXd anti = 0.5 * (m - m.transpose()).eval();
    return TwoTimeKernel(grid, std::move(anti));
}

/// (k1 o k2)(t,t') = integral k1(t,s) k2(s,t') ds, rectangle rule.
inline TwoTimeKernel compose(const TwoTimeKernel& k1, const TwoTimeKernel& k2) {
    require_same_grid(k1.grid(), k2.grid(), "compose");
    Eigen::MatrixXd m = (k1.values() * k2.values()) * k1.grid().dt();
    return TwoTimeKernel(k1.grid(), std::move(m));
}

/// Apply a kernel to a series: (k f)(t) = integral k(t,s) f(s) ds.
inline TimeSeries apply(const TwoTimeKernel& k, const TimeSeries& f) {
    require_same_grid(k.grid(), f.grid(), "apply");
    Eigen::VectorXd v = (k.values() * f.values()) * k.grid().dt();
    return TimeSeries(k.grid(), std::move(v));
}

/// Compositional inverse: compose(invert(k), k) = delta_kernel.
/// Differential-operator kernels are ill-conditioned at large n; inversion
/// is refused below the reciprocal-condition threshold instead of returning
/// silent garbage.
inline TwoTimeKernel invert(const TwoTimeKernel& k, double rcond_min = 1e-12) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(k.values());
    const double rc = lu.rcond();
    if (!(rc > rcond_min))
        throw numeric_error("invert: matrix is singular or ill-conditioned, rcond = " +
                            std::to_string(rc));
    const double dt = k.grid().dt();
    Eigen::MatrixXd m = lu.inverse() / (dt * dt);
    // an exactly singular factorization can slip past the estimate
    if (!m.allFinite())
        throw numeric_error("invert: matrix is singular to working precision");
    return TwoTimeKernel(k.grid(), std::move(m));
}

/// kappa(t',t).
inline TwoTimeKernel transposed(const TwoTimeKernel& k) {
    return TwoTimeKernel(k.grid(), k.values().transpose());
}

/// (kappa(t,t') - kappa(t',t)) / 2 — the part responsible for dissipation.
inline TwoTimeKernel antisymmetric_part(const TwoTimeKernel& k) {
    Eigen::MatrixXd m = 0.5 * (k.values() - k.values().transpose()).eval();
    return TwoTimeKernel(k.grid(), std::move(m));
}

inline TwoTimeKernel symmetric_part(const TwoTimeKernel& k) {
    Eigen::MatrixXd m = 0.5 * (k.values() + k.values().transpose()).eval();
    return TwoTimeKernel(k.grid(), std::move(m));
}

inline TwoTimeKernel operator+(const TwoTimeKernel& a, const TwoTimeKernel& b) {
    require_same_grid(a.grid(), b.grid(), "kernel sum");
    return TwoTimeKernel(a.grid(), a.values() + b.values());
}

inline TwoTimeKernel operator-(const TwoTimeKernel& a, const TwoTimeKernel& b) {
    require_same_grid(a.grid(), b.grid(), "kernel difference");
    return TwoTimeKernel(a.grid(), a.values() - b.values());
}

inline TwoTimeKernel operator*(double c, const TwoTimeKernel& k) {
    return TwoTimeKernel(k.grid(), c * k.values());
}

inline double frobenius_norm(const TwoTimeKernel& k) { return k.values().norm(); }

inline double max_abs(const TwoTimeKernel& k) {
    return k.values().cwiseAbs().maxCoeff();
}

/// Relative Frobenius distance; falls back to an absolute scale when the
/// reference is the zero kernel.
inline double relative_error(const TwoTimeKernel& got, const TwoTimeKernel& want,
                             double fallback_scale = 1.0) {
    const double scale = std::max(want.values().norm(), fallback_scale);
    return (got.values() - want.values()).norm() / scale;
}

} // namespace dqlab
