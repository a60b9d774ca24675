#include "fastexit/harness/config.hpp"

#include "fastexit/errors.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace fastexit {

using nlohmann::json;

namespace {

// Typed accessor over one JSON object that remembers which keys were read,
// so unknown keys can be rejected with their full path.
class Node {
public:
    Node(json j, std::string path) : j_(std::move(j)), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    bool empty() const { return j_.empty(); }
    void skip(const std::string& key) { seen_.insert(key); }
    std::string at(const std::string& key) const { return path_ + "/" + key; }

    double number(const std::string& key, double dflt) {
        seen_.insert(key);
        if (!has(key)) return dflt;
        return as_number(j_.at(key), at(key));
    }
    double positive(const std::string& key, double dflt) {
        const double v = number(key, dflt);
        if (!(v > 0.0)) throw ConfigError(at(key), "must be > 0");
        return v;
    }
    double nonnegative(const std::string& key, double dflt) {
        const double v = number(key, dflt);
        if (!(v >= 0.0)) throw ConfigError(at(key), "must be >= 0");
        return v;
    }
    std::uint64_t u64(const std::string& key, std::uint64_t dflt) {
        seen_.insert(key);
        if (!has(key)) return dflt;
        const auto& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
            throw ConfigError(at(key), "expected a nonnegative integer");
        return v.get<std::uint64_t>();
    }
    std::size_t count(const std::string& key, std::size_t dflt, std::size_t min_value) {
        const auto v = static_cast<std::size_t>(u64(key, dflt));
        if (v < min_value) throw ConfigError(at(key), "must be >= " + std::to_string(min_value));
        return v;
    }
    std::string text(const std::string& key, const std::string& dflt, const std::set<std::string>& allowed = {}) {
        seen_.insert(key);
        if (!has(key)) return dflt;
        if (!j_.at(key).is_string()) throw ConfigError(at(key), "expected a string");
        auto s = j_.at(key).get<std::string>();
        if (!allowed.empty() && !allowed.count(s)) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            throw ConfigError(at(key), "unknown value '" + s + "' (allowed: " + list + ")");
        }
        return s;
    }
    std::vector<double> numbers(const std::string& key, const std::vector<double>& dflt, bool nonempty = true) {
        seen_.insert(key);
        if (!has(key)) return dflt;
        const auto& v = j_.at(key);
        if (!v.is_array()) throw ConfigError(at(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], at(key) + "/" + std::to_string(i)));
        if (nonempty && out.empty()) throw ConfigError(at(key), "must not be empty");
        return out;
    }
    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }
    Node child(const std::string& key) {
        seen_.insert(key);
        return Node(has(key) ? j_.at(key) : json::object(), at(key));
    }
    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(at(k), "unknown field");
    }

private:
    static double as_number(const json& v, const std::string& path) {
        if (!v.is_number()) throw ConfigError(path, "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(path, "must be finite");
        return d;
    }

    json j_;
    std::string path_;
    std::set<std::string> seen_;
};

ScalarLaw parse_law(Node n, const ScalarLaw& dflt) {
    if (n.empty()) return dflt;
    const auto law = n.text("law", "constant", {"constant", "linear", "linear_plus_source", "logistic_clipped"});
    ScalarLaw out;
    if (law == "constant") {
        out = ScalarLaw::constant(n.number("value", 0.0));
    } else if (law == "linear") {
        const double slope = n.number("slope", 0.0);
        const double offset = n.number("offset", 0.0);
        out = ScalarLaw::linear(slope, offset, n.number("slope_xi", 0.0));
    } else if (law == "linear_plus_source") {
        const double slope = n.number("slope", 0.0);
        const double amplitude = n.number("amplitude", 0.0);
        const double wavenumber = n.number("wavenumber", 1.0);
        out = ScalarLaw::linear_plus_source(slope, amplitude, wavenumber, n.number("offset", 0.0));
    } else {
        const double rate = n.number("rate", 1.0);
        out = ScalarLaw::logistic_clipped(rate, n.positive("capacity", 1.0));
    }
    n.finish();
    return out;
}

json law_json(const ScalarLaw& l) {
    switch (l.kind) {
        case LawKind::constant: return {{"law", "constant"}, {"value", l.value}};
        case LawKind::linear:
            return {{"law", "linear"}, {"slope", l.slope}, {"offset", l.offset}, {"slope_xi", l.slope_xi}};
        case LawKind::linear_plus_source:
            return {{"law", "linear_plus_source"}, {"slope", l.slope}, {"amplitude", l.amplitude},
                    {"wavenumber", l.wavenumber}, {"offset", l.offset}};
        case LawKind::logistic_clipped:
            return {{"law", "logistic_clipped"}, {"rate", l.rate}, {"capacity", l.capacity}};
    }
    return {};
}

BoundaryData parse_pair(Node& parent, const std::string& key, BoundaryData dflt, bool nonnegative) {
    const auto v = parent.numbers(key, {dflt[0], dflt[1]});
    if (v.size() != 2) throw ConfigError(parent.at(key), "expected exactly two values (one per boundary point)");
    if (nonnegative && (v[0] < 0.0 || v[1] < 0.0)) throw ConfigError(parent.at(key), "values must be >= 0");
    return BoundaryData{{v[0], v[1]}};
}

PowerLaw parse_power(Node n) {
    PowerLaw p;
    p.coeff = n.nonnegative("coeff", 1.0);
    p.exponent = n.number("exponent", 0.5);
    n.finish();
    return p;
}

RhoBar parse_rho(Node& parent, const std::string& key) {
    if (!parent.has(key)) {
        parent.skip(key);
        return RhoBar::finite(1.0);
    }
    const json& v = parent.raw(key);
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "infinity") return RhoBar::infinity();
        throw ConfigError(parent.at(key), "expected a nonnegative number or \"inf\"");
    }
    if (!v.is_number() || !(v.get<double>() >= 0.0) || !std::isfinite(v.get<double>()))
        throw ConfigError(parent.at(key), "expected a nonnegative number or \"inf\"");
    return RhoBar::finite(v.get<double>());
}

}  // namespace

CovarianceSpectrumQ SpectrumQConfig::build(std::size_t n_modes) const {
    if (kind == "flat") return CovarianceSpectrumQ::flat(n_modes, value);
    if (kind == "power_law") return CovarianceSpectrumQ::power_law(n_modes, amplitude, exponent);
    if (values.size() != n_modes)
        throw ConfigError("/noise/Q/values", "length " + std::to_string(values.size()) + " differs from n_modes " +
                                                 std::to_string(n_modes));
    return CovarianceSpectrumQ(values);
}

Field InitialConfig::build(const SpectralOperator& op) const {
    if (!coeffs.empty()) {
        if (coeffs.size() != op.n_modes())
            throw ConfigError("/initial/coeffs", "length differs from n_modes");
        return Field(Eigen::Map<const Eigen::VectorXd>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size())));
    }
    const auto& xi = op.nodes();
    Eigen::VectorXd v(xi.size());
    for (Eigen::Index i = 0; i < xi.size(); ++i) {
        double s = constant;
        for (const auto& [k, a] : cosines) s += a * std::cos(k * std::numbers::pi * xi(i));
        v(i) = s;
    }
    return op.from_grid(v);
}

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    Node root(j, "");
    c.experiment = root.text("experiment", c.experiment,
                             {"check", "simulate", "average", "action", "quasipotential", "exit"});
    c.seed = root.u64("seed", c.seed);
    c.output_dir = root.text("output_dir", c.output_dir);
    c.threads = root.count("threads", c.threads, 1);

    {
        Node n = root.child("operator");
        c.builder = n.text("builder", c.builder, {"neumann_laplacian_1d", "divergence_1d"});
        c.n_modes = n.count("n_modes", c.n_modes, 2);
        c.quadrature_points = n.count("quadrature_points", c.quadrature_points, 0);
        if (c.quadrature_points != 0 && c.quadrature_points < 4 * c.n_modes)
            throw ConfigError("/operator/quadrature_points", "must be 0 or >= 4 n_modes");
        c.dimension = static_cast<int>(n.count("dimension", 1, 1));
        Node a = n.child("diffusivity");
        c.diffusivity_a0 = a.number("a0", c.diffusivity_a0);
        c.diffusivity_a1 = a.number("a1", c.diffusivity_a1);
        if (!(c.diffusivity_a0 > 0.0) || !(c.diffusivity_a0 + c.diffusivity_a1 > 0.0))
            throw ConfigError("/operator/diffusivity", "a0 + a1 xi must stay positive on [0, 1]");
        a.finish();
        n.finish();
    }
    {
        Node n = root.child("coefficients");
        c.coefficients.f = parse_law(n.child("f"), c.coefficients.f);
        c.coefficients.g = parse_law(n.child("g"), c.coefficients.g);
        c.coefficients.sigma = parse_pair(n, "sigma", c.coefficients.sigma, false);
        if (n.has("g_sup_bound")) c.coefficients.g_sup_bound = n.positive("g_sup_bound", 1.0);
        else n.skip("g_sup_bound");
        n.finish();
    }
    {
        Node n = root.child("noise");
        Node q = n.child("Q");
        c.q.kind = q.text("kind", c.q.kind, {"flat", "list", "power_law"});
        if (c.q.kind == "flat") c.q.value = q.nonnegative("value", c.q.value);
        if (c.q.kind == "power_law") {
            c.q.amplitude = q.nonnegative("amplitude", c.q.amplitude);
            c.q.exponent = q.number("exponent", c.q.exponent);
        }
        if (c.q.kind == "list") {
            c.q.values = q.numbers("values", {});
            for (std::size_t i = 0; i < c.q.values.size(); ++i)
                if (c.q.values[i] < 0.0) throw ConfigError("/noise/Q/values/" + std::to_string(i), "must be >= 0");
            if (c.q.values.size() != c.n_modes)
                throw ConfigError("/noise/Q/values", "length must equal n_modes");
        }
        q.finish();
        c.thetas = parse_pair(n, "B", c.thetas, true);
        c.delta0 = n.positive("delta0", c.delta0);
        n.finish();
    }
    {
        Node n = root.child("schedule");
        c.schedule.alpha = parse_power(n.child("alpha"));
        c.schedule.beta = parse_power(n.child("beta"));
        c.schedule.rho_bar = parse_rho(n, "rho_bar");
        c.eps = n.numbers("eps", c.eps);
        for (std::size_t i = 0; i < c.eps.size(); ++i)
            if (!(c.eps[i] > 0.0)) throw ConfigError("/schedule/eps/" + std::to_string(i), "must be > 0");
        c.rho_tolerance = n.positive("tolerance", c.rho_tolerance);
        n.finish();
    }
    {
        Node n = root.child("solver");
        c.T = n.positive("T", c.T);
        c.dt = n.positive("dt", c.dt);
        if (c.dt > c.T) throw ConfigError("/solver/dt", "must not exceed T");
        c.delta = n.nonnegative("delta", c.delta);
        if (c.delta >= c.T) throw ConfigError("/solver/delta", "must be < T");
        c.record_every = n.count("record_every", c.record_every, 1);
        c.paths = n.count("paths", c.paths, 1);
        n.finish();
    }
    {
        Node n = root.child("initial");
        c.initial.constant = n.number("constant", 0.0);
        if (n.has("cosines")) {
            const json& arr = n.raw("cosines");
            if (!arr.is_array()) throw ConfigError("/initial/cosines", "expected an array");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                Node t(arr[i], "/initial/cosines/" + std::to_string(i));
                const int k = static_cast<int>(t.count("k", 0, 0));
                c.initial.cosines.emplace_back(k, t.number("amplitude", 0.0));
                t.finish();
            }
        } else {
            n.skip("cosines");
        }
        c.initial.coeffs = n.numbers("coeffs", {}, false);
        n.finish();
    }
    {
        Node n = root.child("check");
        c.check_target = n.text("target", c.check_target,
                                {"check", "simulate", "average", "action", "quasipotential", "exit"});
        c.t_grid = n.numbers("t_grid", c.t_grid);
        c.u_grid = n.numbers("u_grid", c.u_grid);
        c.nondeg_floor = n.positive("nondeg_floor", c.nondeg_floor);
        c.lipschitz_samples = n.count("lipschitz_samples", c.lipschitz_samples, 1);
        n.finish();
    }
    {
        Node n = root.child("action");
        if (n.has("knots")) {
            const json& arr = n.raw("knots");
            if (!arr.is_array() || arr.size() < 2) throw ConfigError("/action/knots", "expected at least two [t, w] pairs");
            c.action_knots.clear();
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const auto p = "/action/knots/" + std::to_string(i);
                if (!arr[i].is_array() || arr[i].size() != 2 || !arr[i][0].is_number() || !arr[i][1].is_number())
                    throw ConfigError(p, "expected a [t, w] pair");
                c.action_knots.emplace_back(arr[i][0].get<double>(), arr[i][1].get<double>());
                if (i > 0 && !(c.action_knots[i].first > c.action_knots[i - 1].first))
                    throw ConfigError(p, "knot times must increase");
            }
        } else {
            n.skip("knots");
        }
        c.action_nodes = n.count("nodes", c.action_nodes, 2);
        n.finish();
    }
    {
        Node n = root.child("quasipotential");
        c.qp_y = n.numbers("y", c.qp_y);
        c.horizons = n.numbers("horizons", c.horizons);
        for (std::size_t i = 0; i < c.horizons.size(); ++i)
            if (!(c.horizons[i] > 0.0))
                throw ConfigError("/quasipotential/horizons/" + std::to_string(i), "must be > 0");
        c.qp_nodes = n.count("nodes", c.qp_nodes, 3);
        n.finish();
    }
    {
        Node n = root.child("exit");
        Node d = n.child("domain");
        const auto profile = d.text("profile", "square", {"square", "quadratic", "logcosh_quadratic"});
        try {
            if (profile == "square") {
                c.profile = ConvexProfile::square();
            } else if (profile == "quadratic") {
                const double a = d.number("a", 1.0);
                const double b = d.number("b", 0.0);
                c.profile = ConvexProfile::quadratic(a, b, d.number("c", 0.0));
            } else {
                const double a = d.number("a", 1.0);
                c.profile = ConvexProfile::logcosh_quadratic(a, d.number("b", 1.0));
            }
        } catch (const std::invalid_argument& e) {
            throw ConfigError("/exit/domain", e.what());
        }
        c.r = d.number("r", c.r);
        d.finish();
        c.gamma_grid = n.numbers("gamma", c.gamma_grid);
        for (std::size_t i = 0; i < c.gamma_grid.size(); ++i)
            if (!(c.gamma_grid[i] > 0.0)) throw ConfigError("/exit/gamma/" + std::to_string(i), "must be > 0");
        c.exit_paths = n.count("paths", c.exit_paths, 1);
        c.exit_dt = n.positive("dt", c.exit_dt);
        if (n.has("t_max")) c.t_max = n.positive("t_max", 1.0);
        else n.skip("t_max");
        c.t_max_cap = n.positive("t_max_cap", c.t_max_cap);
        c.rho_ball = n.nonnegative("rho_ball", c.rho_ball);
        c.concentration_ratio = n.positive("concentration_ratio", c.concentration_ratio);
        n.finish();
    }
    root.finish();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("/", "cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(is, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("/", std::string("malformed JSON: ") + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["experiment"] = c.experiment;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["threads"] = c.threads;
    j["operator"] = {{"builder", c.builder},
                     {"n_modes", c.n_modes},
                     {"quadrature_points", c.quadrature_points},
                     {"dimension", c.dimension},
                     {"diffusivity", {{"a0", c.diffusivity_a0}, {"a1", c.diffusivity_a1}}}};
    json coeffs = {{"f", law_json(c.coefficients.f)},
                   {"g", law_json(c.coefficients.g)},
                   {"sigma", {c.coefficients.sigma[0], c.coefficients.sigma[1]}}};
    if (c.coefficients.g_sup_bound) coeffs["g_sup_bound"] = *c.coefficients.g_sup_bound;
    j["coefficients"] = coeffs;
    json q = {{"kind", c.q.kind}};
    if (c.q.kind == "flat") q["value"] = c.q.value;
    if (c.q.kind == "power_law") {
        q["amplitude"] = c.q.amplitude;
        q["exponent"] = c.q.exponent;
    }
    if (c.q.kind == "list") q["values"] = c.q.values;
    j["noise"] = {{"Q", q}, {"B", {c.thetas[0], c.thetas[1]}}, {"delta0", c.delta0}};
    json rho = c.schedule.rho_bar.is_infinite() ? json("inf") : json(c.schedule.rho_bar.value());
    j["schedule"] = {{"alpha", {{"coeff", c.schedule.alpha.coeff}, {"exponent", c.schedule.alpha.exponent}}},
                     {"beta", {{"coeff", c.schedule.beta.coeff}, {"exponent", c.schedule.beta.exponent}}},
                     {"rho_bar", rho},
                     {"eps", c.eps},
                     {"tolerance", c.rho_tolerance}};
    j["solver"] = {{"T", c.T}, {"dt", c.dt}, {"delta", c.delta}, {"record_every", c.record_every}, {"paths", c.paths}};
    json cos = json::array();
    for (const auto& [k, a] : c.initial.cosines) cos.push_back({{"k", k}, {"amplitude", a}});
    j["initial"] = {{"constant", c.initial.constant}, {"cosines", cos}, {"coeffs", c.initial.coeffs}};
    j["check"] = {{"target", c.check_target},
                  {"t_grid", c.t_grid},
                  {"u_grid", c.u_grid},
                  {"nondeg_floor", c.nondeg_floor},
                  {"lipschitz_samples", c.lipschitz_samples}};
    json knots = json::array();
    for (const auto& [t, w] : c.action_knots) knots.push_back({t, w});
    j["action"] = {{"knots", knots}, {"nodes", c.action_nodes}};
    j["quasipotential"] = {{"y", c.qp_y}, {"horizons", c.horizons}, {"nodes", c.qp_nodes}};
    json dom = {{"profile", c.profile.name()}, {"r", c.r}};
    if (c.profile.kind == ProfileKind::quadratic) {
        dom["a"] = c.profile.a;
        dom["b"] = c.profile.b;
        dom["c"] = c.profile.c;
    } else if (c.profile.kind == ProfileKind::logcosh_quadratic) {
        dom["a"] = c.profile.a;
        dom["b"] = c.profile.b;
    }
    json ex = {{"domain", dom},
               {"gamma", c.gamma_grid},
               {"paths", c.exit_paths},
               {"dt", c.exit_dt},
               {"t_max_cap", c.t_max_cap},
               {"rho_ball", c.rho_ball},
               {"concentration_ratio", c.concentration_ratio}};
    if (c.t_max) ex["t_max"] = *c.t_max;
    j["exit"] = ex;
    return j;
}

}  // namespace fastexit
