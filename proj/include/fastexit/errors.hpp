#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fastexit {

/// A path blew up: some coefficient became non-finite or exceeded the
/// divergence threshold.
class DivergedError : public std::runtime_error {
public:
    DivergedError(std::size_t step, double time, const std::string& what)
        : std::runtime_error(what), step_(step), time_(time) {}

    std::size_t step() const noexcept { return step_; }
    double time() const noexcept { return time_; }

private:
    std::size_t step_;
    double time_;
};

/// The noise intensity H vanished where the action functional needs it.
class NondegeneracyError : public std::runtime_error {
public:
    NondegeneracyError(double t, double u, double h)
        : std::runtime_error("noise intensity H(" + std::to_string(t) + ", " +
                             std::to_string(u) + ") = " + std::to_string(h) +
                             " is not positive"),
          t_(t), u_(u), h_(h) {}

    double t() const noexcept { return t_; }
    double u() const noexcept { return u_; }
    double h() const noexcept { return h_; }

private:
    double t_, u_, h_;
};

/// Path optimizer ran out of iterations. Carries the best value it reached.
class OptimizationFailed : public std::runtime_error {
public:
    OptimizationFailed(double best_value, const std::string& what)
        : std::runtime_error(what), best_value_(best_value) {}

    double best_value() const noexcept { return best_value_; }

private:
    double best_value_;
};

/// Operation requested on a model it does not apply to (e.g. the closed-form
/// quasi-potential on a multiplicative-noise model).
class NotApplicable : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Config schema violation. `field_path()` is a JSON-pointer-like path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field_path, const std::string& what)
        : std::runtime_error(field_path + ": " + what), field_path_(std::move(field_path)) {}

    const std::string& field_path() const noexcept { return field_path_; }

private:
    std::string field_path_;
};

}  // namespace fastexit
