#include "fastexit/ldp.hpp"

#include "fastexit/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace fastexit {

ScalarPath ScalarPath::uniform(double a, double b, std::vector<double> values) {
    ScalarPath p;
    const std::size_t n = values.size();
    if (n < 2) throw std::invalid_argument("ScalarPath: need at least two nodes");
    p.times.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        p.times[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    p.times[n - 1] = b;
    p.values = std::move(values);
    p.validate();
    return p;
}

ScalarPath ScalarPath::sample(double a, double b, std::size_t nodes, const std::function<double(double)>& w) {
    if (nodes < 2) throw std::invalid_argument("ScalarPath: need at least two nodes");
    std::vector<double> v(nodes);
    for (std::size_t i = 0; i < nodes; ++i)
        v[i] = w(a + (b - a) * static_cast<double>(i) / static_cast<double>(nodes - 1));
    return uniform(a, b, std::move(v));
}

ScalarPath ScalarPath::from(const ScalarTrajectory& traj) {
    ScalarPath p{traj.times, traj.values};
    p.validate();
    return p;
}

void ScalarPath::validate() const {
    if (times.size() < 2 || times.size() != values.size())
        throw std::invalid_argument("ScalarPath: need matching times/values with at least two nodes");
    const double h = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    if (!(h > 0.0)) throw std::invalid_argument("ScalarPath: grid must be increasing");
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
        if (std::abs((times[i + 1] - times[i]) - h) > 1e-9 * std::max(1.0, h))
            throw std::invalid_argument("ScalarPath: grid must be uniform");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("ScalarPath: non-finite value");
}

namespace {

// Residual, intensity and their derivatives at one interval midpoint.
struct IntervalTerms {
    double r, H, dF, dH;
};

IntervalTerms interval_terms(const AveragedModel& model, double t0, double h, double w0, double w1) {
    const double tm = t0 + 0.5 * h;
    const double wm = 0.5 * (w0 + w1);
    const double H = model.H(tm, wm);
    if (!(H > 0.0)) throw NondegeneracyError(tm, wm, H);
    return {(w1 - w0) / h - model.F_bar(tm, wm), H, model.dF_bar(tm, wm), model.dH(tm, wm)};
}

// Discrete action over the full node vector; gradient w.r.t. every node.
double discrete_action(const AveragedModel& model, double t0, double h, const std::vector<double>& w,
                       std::vector<double>* grad) {
    double total = 0.0;
    if (grad) grad->assign(w.size(), 0.0);
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        const auto it = interval_terms(model, t0 + static_cast<double>(i) * h, h, w[i], w[i + 1]);
        total += 0.5 * h * it.r * it.r / it.H;
        if (grad) {
            const double common = -it.r * it.r * it.dH / (4.0 * it.H * it.H);
            (*grad)[i + 1] += h * (it.r * (1.0 / h - 0.5 * it.dF) / it.H + common);
            (*grad)[i] += h * (it.r * (-1.0 / h - 0.5 * it.dF) / it.H + common);
        }
    }
    return total;
}

class PathAction final : public ceres::FirstOrderFunction {
public:
    PathAction(const AveragedModel& model, double t0, double h, std::size_t nodes, double w0, double w1)
        : model_(model), t0_(t0), h_(h), nodes_(nodes), w0_(w0), w1_(w1) {}

    bool Evaluate(const double* x, double* cost, double* gradient) const override {
        std::vector<double> w(nodes_);
        w.front() = w0_;
        w.back() = w1_;
        std::copy(x, x + NumParameters(), w.begin() + 1);
        std::vector<double> g;
        try {
            *cost = discrete_action(model_, t0_, h_, w, gradient ? &g : nullptr);
        } catch (const NondegeneracyError&) {
            return false;
        }
        if (!std::isfinite(*cost)) return false;
        if (gradient) std::copy(g.begin() + 1, g.end() - 1, gradient);
        return true;
    }

    int NumParameters() const override { return static_cast<int>(nodes_) - 2; }

private:
    const AveragedModel& model_;
    double t0_, h_;
    std::size_t nodes_;
    double w0_, w1_;
};

}  // namespace

ActionValue action_I(const AveragedModel& model, const ScalarPath& w) {
    w.validate();
    return {discrete_action(model, w.times.front(), w.dt(), w.values, nullptr), false};
}

ActionValue action_I(const AveragedModel& model, const FieldTrajectory& path, double tolerance) {
    const auto& op = model.op();
    ScalarTrajectory scalar;
    scalar.times = path.times;
    for (const auto& u : path.states) {
        if (op.nonconstant_magnitude(u) > tolerance) return ActionValue::inf();
        scalar.values.push_back(op.constant_value(u));
    }
    return action_I(model, ScalarPath::from(scalar));
}

ControlPath minimizing_control(const AveragedModel& model, const ScalarPath& w) {
    w.validate();
    const double a = model.rho_bar().interior_weight();
    const double b = model.rho_bar().boundary_weight();
    const double h = w.dt();
    ControlPath phi;
    phi.times = w.times;
    const std::size_t n = w.size() - 1;
    phi.phi_H.reserve(n);
    phi.phi_Z.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto it = interval_terms(model, w.times[i], h, w.values[i], w.values[i + 1]);
        const double tm = w.times[i] + 0.5 * h;
        const double wm = 0.5 * (w.values[i] + w.values[i + 1]);
        const double c = it.r / it.H;
        phi.phi_H.push_back(c * a * model.G_row(tm, wm));
        const BoundaryData s = model.Sigma_row(tm);
        phi.phi_Z.push_back(BoundaryData{{c * b * s[0], c * b * s[1]}});
    }
    return phi;
}

PathOptimum minimize_action(const AveragedModel& model, double t0, double t1, std::size_t nodes, double w0,
                            double w1, OptimizerSettings settings) {
    if (nodes < 2) throw std::invalid_argument("minimize_action: need at least two nodes");
    if (!(t1 > t0)) throw std::invalid_argument("minimize_action: empty time interval");
    const double h = (t1 - t0) / static_cast<double>(nodes - 1);

    std::vector<double> w(nodes);
    for (std::size_t i = 0; i < nodes; ++i)
        w[i] = w0 + (w1 - w0) * static_cast<double>(i) / static_cast<double>(nodes - 1);
    w.back() = w1;

    PathOptimum out;
    if (nodes > 2) {
        std::vector<double> x(w.begin() + 1, w.end() - 1);
        ceres::GradientProblem problem(new PathAction(model, t0, h, nodes, w0, w1));
        ceres::GradientProblemSolver::Options options;
        options.line_search_direction_type = ceres::LBFGS;
        options.max_num_iterations = settings.max_iterations;
        options.gradient_tolerance = settings.gradient_tolerance;
        options.function_tolerance = 1e-14;
        options.parameter_tolerance = 1e-14;
        options.logging_type = ceres::SILENT;
        ceres::GradientProblemSolver::Summary summary;
        ceres::Solve(options, problem, x.data(), &summary);
        out.iterations = static_cast<int>(summary.iterations.size());
        if (summary.termination_type != ceres::CONVERGENCE) {
            const double best = std::isfinite(summary.final_cost) ? summary.final_cost : summary.initial_cost;
            throw OptimizationFailed(best, "path optimizer did not converge: " + summary.message);
        }
        std::copy(x.begin(), x.end(), w.begin() + 1);
    }
    out.path = ScalarPath::uniform(t0, t1, w);
    out.value = discrete_action(model, t0, h, w, nullptr);
    return out;
}

double prefix_action_J(const AveragedModel& model, double x_mean, double y_delta, double delta,
                       std::size_t grid_nodes) {
    if (!(delta > 0.0)) throw std::invalid_argument("prefix_action_J: delta must be > 0");
    return minimize_action(model, 0.0, delta, grid_nodes, x_mean, y_delta).value;
}

double quasi_potential_explicit(const AveragedModel& model, double y) {
    if (!model.is_additive() || !model.is_autonomous())
        throw NotApplicable("explicit quasi-potential requires additive, autonomous noise");
    if (y == 0.0) return 0.0;
    const double H = model.H(0.0, 0.0);
    if (!(H > 0.0)) throw NondegeneracyError(0.0, 0.0, H);
    auto f = [&](double s) { return model.F_bar(0.0, s); };
    const double integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, y, 10, 1e-13);
    return -2.0 / H * integral;
}

QuasiPotentialResult quasi_potential_search(const AveragedModel& model, double y, const std::vector<double>& horizons,
                                            std::size_t nodes) {
    if (!std::isfinite(y)) throw std::invalid_argument("quasi_potential: y must be finite");
    if (horizons.empty()) throw std::invalid_argument("quasi_potential: need at least one horizon");
    QuasiPotentialResult res;
    res.horizons = horizons;
    res.value = std::numeric_limits<double>::infinity();
    for (double T : horizons) {
        if (!(T > 0.0)) throw std::invalid_argument("quasi_potential: horizons must be > 0");
        if (y == 0.0) {
            res.per_horizon.push_back(0.0);
            res.value = 0.0;
            res.best_path = ScalarPath::uniform(0.0, T, std::vector<double>(nodes < 2 ? 2 : nodes, 0.0));
            continue;
        }
        auto opt = minimize_action(model, 0.0, T, nodes, 0.0, y);
        res.per_horizon.push_back(opt.value);
        if (opt.value < res.value) {
            res.value = opt.value;
            res.best_path = std::move(opt.path);
        }
    }
    return res;
}

double quasi_potential_variational(const AveragedModel& model, double y, const std::vector<double>& horizons,
                                   std::size_t nodes) {
    return quasi_potential_search(model, y, horizons, nodes).value;
}

double v_bar(const AveragedModel& model, double y1, double y2, const VBarSettings& settings) {
    if (!(y1 < 0.0 && y2 > 0.0)) throw std::invalid_argument("v_bar: need y1 < 0 < y2");
    if (model.is_additive()) return std::min(quasi_potential_explicit(model, y1), quasi_potential_explicit(model, y2));
    return std::min(quasi_potential_variational(model, y1, settings.horizons, settings.nodes),
                    quasi_potential_variational(model, y2, settings.horizons, settings.nodes));
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << std::setprecision(17);
    return os;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const ScalarPath& w) {
    auto os = open_out(path);
    os << "t,value\n";
    for (std::size_t i = 0; i < w.size(); ++i) os << w.times[i] << ',' << w.values[i] << '\n';
}

void write_csv(const std::filesystem::path& path, const ControlPath& phi) {
    auto os = open_out(path);
    const auto n = phi.n_intervals() == 0 ? 0 : phi.phi_H.front().size();
    os << 't';
    for (Eigen::Index k = 0; k < n; ++k) os << ",phi_H_" << k;
    os << ",phi_Z_0,phi_Z_1\n";
    // One row per interval, stamped with its left end.
    for (std::size_t i = 0; i < phi.n_intervals(); ++i) {
        os << phi.times[i];
        for (Eigen::Index k = 0; k < n; ++k) os << ',' << phi.phi_H[i](k);
        os << ',' << phi.phi_Z[i][0] << ',' << phi.phi_Z[i][1] << '\n';
    }
}

}  // namespace fastexit
