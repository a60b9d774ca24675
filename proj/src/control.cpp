#include "fastexit/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fastexit {

ControlPath ControlPath::zero(const std::vector<double>& times, std::size_t n_modes) {
    ControlPath c;
    c.times = times;
    const std::size_t n = times.size() < 2 ? 0 : times.size() - 1;
    c.phi_H.assign(n, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_modes)));
    c.phi_Z.assign(n, BoundaryData{});
    c.validate();
    return c;
}

std::size_t ControlPath::interval_at(double t) const {
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0;
    const auto i = static_cast<std::size_t>(it - times.begin()) - 1;
    return std::min(i, n_intervals() - 1);
}

double ControlPath::l2_norm_sq() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < n_intervals(); ++i)
        acc += (times[i + 1] - times[i]) * (phi_H[i].squaredNorm() + phi_Z[i].norm_sq());
    return acc;
}

void ControlPath::validate() const {
    if (times.size() < 2) throw std::invalid_argument("ControlPath: need at least two grid times");
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
        if (!(times[i + 1] > times[i])) throw std::invalid_argument("ControlPath: grid must be strictly increasing");
    if (phi_H.size() != times.size() - 1 || phi_Z.size() != times.size() - 1)
        throw std::invalid_argument("ControlPath: one value per interval required");
    for (std::size_t i = 1; i < phi_H.size(); ++i)
        if (phi_H[i].size() != phi_H[0].size()) throw std::invalid_argument("ControlPath: ragged phi_H");
}

}  // namespace fastexit
