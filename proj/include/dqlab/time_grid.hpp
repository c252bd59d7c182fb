#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "dqlab/errors.hpp"

namespace dqlab {

/// Uniform sampling of a finite time window. This is the discretization
/// contract for every kernel and series: all binary operations require the
/// operands to carry an equal grid, and equality means all three defining
/// fields are equal.
class TimeGrid {
public:
    TimeGrid(double t_start, double t_end, int n)
        : t_start_(t_start), t_end_(t_end), n_(n) {
        if (!std::isfinite(t_start) || !std::isfinite(t_end))
            throw validation_error("TimeGrid: bounds must be finite");
        if (!(t_end > t_start))
            throw validation_error("TimeGrid: t_end must exceed t_start");
        if (n < 8)
            throw validation_error("TimeGrid: need at least 8 samples, got " +
                                   std::to_string(n));
        dt_ = (t_end_ - t_start_) / static_cast<double>(n_ - 1);
    }

    double t_start() const { return t_start_; }
    double t_end() const { return t_end_; }
    int size() const { return n_; }
    double dt() const { return dt_; }

    /// k-th sample, exactly t_start + k*dt.
    double t(int k) const { return t_start_ + static_cast<double>(k) * dt_; }

    Eigen::VectorXd times() const {
        Eigen::VectorXd v(n_);
        for (int k = 0; k < n_; ++k) v[k] = t(k);
        return v;
    }

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
        return a.t_start_ == b.t_start_ && a.t_end_ == b.t_end_ && a.n_ == b.n_;
    }
    friend bool operator!=(const TimeGrid& a, const TimeGrid& b) { return !(a == b); }

private:
    double t_start_;
    double t_end_;
    int n_;
    double dt_;
};

inline void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* where) {
    if (a != b)
        throw validation_error(std::string(where) + ": grid mismatch");
}

} // namespace dqlab
