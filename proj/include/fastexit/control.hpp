#pragma once

#include "fastexit/spectral.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace fastexit {

/// Control phi = (phi_H, phi_Z), constant on each interval of a time grid.
/// phi_H[i] and phi_Z[i] hold the value on [times[i], times[i+1]).
struct ControlPath {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> phi_H;
    std::vector<BoundaryData> phi_Z;

    static ControlPath zero(const std::vector<double>& times, std::size_t n_modes);

    std::size_t n_intervals() const { return phi_H.size(); }
    double t_begin() const { return times.front(); }
    double t_end() const { return times.back(); }

    /// Interval containing t; the last interval is closed on the right.
    std::size_t interval_at(double t) const;

    /// Squared L^2(0,T;V) norm: sum of dt_i (|phi_H,i|^2 + |phi_Z,i|^2).
    double l2_norm_sq() const;

    /// Throws std::invalid_argument when the grid or the per-interval arrays are inconsistent.
    void validate() const;
};

}  // namespace fastexit
