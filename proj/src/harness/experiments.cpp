#include "fastexit/harness/experiments.hpp"

#include "fastexit/errors.hpp"
#include "fastexit/harness/io.hpp"
#include "fastexit/ldp.hpp"
#include "fastexit/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

namespace fastexit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json rho_json(RhoBar r) { return r.is_infinite() ? json("inf") : json(r.value()); }

// NaN and infinities are not valid JSON numbers.
json num(double v) { return std::isfinite(v) ? json(v) : json(fmt_double(v)); }

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double ci95(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return 1.96 * std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

std::vector<double> sup_norms(const SpectralOperator& op) {
    std::vector<double> out(op.n_modes());
    for (std::size_t k = 0; k < op.n_modes(); ++k) {
        const auto col = op.basis_on_grid().col(static_cast<Eigen::Index>(k));
        const auto bv = op.boundary_values(k);
        out[k] = std::max({col.cwiseAbs().maxCoeff(), std::abs(bv[0]), std::abs(bv[1])});
    }
    return out;
}

json probe_entry(const std::string& name, bool passed, bool required, json details) {
    return {{"name", name}, {"passed", passed}, {"required", required}, {"details", std::move(details)}};
}

ExitMcSettings mc_settings(const ExperimentConfig& cfg) {
    ExitMcSettings s;
    s.dt = cfg.exit_dt;
    s.t_max = cfg.t_max;
    s.t_max_cap = cfg.t_max_cap;
    s.threads = cfg.threads;
    s.seed = cfg.seed;
    s.rho_ball = cfg.rho_ball;
    s.concentration_ratio = cfg.concentration_ratio;
    return s;
}

// Limit-ODE values on the recorded subset of the solver grid.
ScalarTrajectory recorded_reference(const AveragedModel& model, double x_mean, double T, double dt,
                                    std::size_t every) {
    const ScalarTrajectory full = solve_limit_ode(model, x_mean, T, dt);
    ScalarTrajectory out;
    const std::size_t n = full.times.size() - 1;
    for (std::size_t i = 0; i <= n; ++i) {
        if (i == 0 || i % every == 0 || i == n) {
            out.times.push_back(full.times[i]);
            out.values.push_back(full.values[i]);
        }
    }
    return out;
}

ScalarPath knot_path(const ExperimentConfig& cfg) {
    const auto& k = cfg.action_knots;
    const double a = k.front().first, b = k.back().first;
    return ScalarPath::sample(a, b, cfg.action_nodes, [&](double t) {
        std::size_t i = 0;
        while (i + 2 < k.size() && t > k[i + 1].first) ++i;
        const double w = (t - k[i].first) / (k[i + 1].first - k[i].first);
        return (1.0 - w) * k[i].second + w * k[i + 1].second;
    });
}

}  // namespace

BuiltSystem build_system(const ExperimentConfig& cfg) {
    BuiltSystem b;
    if (cfg.builder == "neumann_laplacian_1d") {
        b.op = std::make_shared<const SpectralOperator>(build_neumann_laplacian_1d(cfg.n_modes, cfg.quadrature_points));
    } else {
        const double a0 = cfg.diffusivity_a0, a1 = cfg.diffusivity_a1;
        b.op = std::make_shared<const SpectralOperator>(
            build_divergence_operator_1d(cfg.n_modes, [a0, a1](double xi) { return a0 + a1 * xi; }));
    }
    b.sys = SpdeSystem{b.op, cfg.coefficients, cfg.q.build(cfg.n_modes), CovarianceSpectrumB(cfg.thetas), cfg.delta0};
    b.model = std::make_shared<const AveragedModel>(b.op, cfg.coefficients, b.sys.q, b.sys.b, cfg.schedule.rho_bar,
                                                    cfg.delta0);
    b.x = cfg.initial.build(*b.op);
    return b;
}

RunResult run_check(const ExperimentConfig& cfg, const fs::path& out, const std::string& target) {
    const BuiltSystem b = build_system(cfg);
    const auto& op = *b.op;
    json probes = json::array();
    bool ok = true;
    auto add = [&](const std::string& name, bool passed, bool required, json details) {
        if (required && !passed) ok = false;
        probes.push_back(probe_entry(name, passed, required, std::move(details)));
    };

    {
        const RngStream rng(cfg.seed, 0xC0FFEE);
        Field h = Field::zero(op.n_modes());
        for (std::size_t k = 0; k < op.n_modes(); ++k)
            h.coeffs(static_cast<Eigen::Index>(k)) = rng.normal(0, static_cast<std::uint32_t>(k));
        const auto rep = check_spectral_gap(op, h, {0.1, 0.5, 1.0});
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& e : rep.entries) worst = std::min(worst, e.margin);
        add("spectral_gap", rep.passed, true, {{"gap", op.spectral_gap()}, {"worst_margin", worst}});
    }
    {
        const auto rep = check_hyp_eigenvalues(cfg.dimension, b.sys.q.lambdas, sup_norms(op),
                                               {cfg.thetas[0], cfg.thetas[1]});
        json d = {{"dimension", rep.dimension}, {"note", rep.note}, {"kappa_Q", num(rep.kappa_Q)},
                  {"kappa_B", num(rep.kappa_B)}};
        if (rep.rho) d["rho"] = *rep.rho;
        if (rep.beta) d["beta"] = *rep.beta;
        add("noise_eigenvalues", rep.passed, true, d);
    }
    {
        const auto rep = check_rho_consistency(cfg.schedule, cfg.eps, cfg.rho_tolerance);
        add("rho_consistency", rep.passed, true,
            {{"declared", rho_json(cfg.schedule.rho_bar)}, {"limit", rho_json(rep.limit)}, {"eps", rep.eps},
             {"ratio", rep.ratio}, {"note", rep.note}});
    }
    {
        const auto rep = check_lipschitz(cfg.coefficients, op, cfg.T, cfg.lipschitz_samples, cfg.seed);
        add("lipschitz", rep.passed, true,
            {{"max_ratio_f", rep.max_ratio_f}, {"max_ratio_g", rep.max_ratio_g},
             {"sup_f_at_zero", rep.sup_f_at_zero}, {"sup_g_at_zero", rep.sup_g_at_zero},
             {"evidence_only", true}});
    }
    const bool needs_action = target == "action" || target == "quasipotential" || target == "exit";
    {
        const auto rep = check_nondegeneracy(*b.model, cfg.t_grid, cfg.u_grid, cfg.nondeg_floor);
        add("nondegeneracy", rep.passed, needs_action,
            {{"min_H", rep.min_h}, {"t_at_min", rep.t_at_min}, {"u_at_min", rep.u_at_min}, {"floor", rep.floor}});
    }
    if (target == "exit") {
        try {
            const DomainSpec dom = build_domain(cfg.profile, cfg.r, op);
            const auto rep = check_exit_hypotheses(*b.model, dom);
            add("exit_g_bounded", rep.g_bounded, true, {{"note", rep.g_note}});
            add("exit_flow_invariance", rep.flow_contained && rep.flow_attracted, true,
                {{"contained", rep.flow_contained}, {"attracted", rep.flow_attracted}, {"witness", rep.flow_witness}});
            add("exit_domain", rep.contains_origin && rep.domain.passed(), true,
                {{"contains_origin", rep.contains_origin},
                 {"semigroup_monotone", rep.domain.semigroup_monotone},
                 {"worst_margin", num(rep.domain.worst_semigroup_margin)},
                 {"jensen_ok", rep.domain.jensen_ok},
                 {"samples", rep.domain.samples},
                 {"section", {dom.y1, dom.y2}}});
        } catch (const std::invalid_argument& e) {
            add("exit_domain", false, true, {{"error", e.what()}});
        }
    }

    RunResult res;
    res.status = ok ? kStatusOk : kStatusHypothesis;
    res.summary = {{"target", target}, {"passed", ok}, {"probes", probes}};
    write_json(out / "check.json", res.summary);
    res.outputs.push_back("check.json");
    return res;
}

RunResult run_simulate(const ExperimentConfig& cfg, const fs::path& out) {
    const BuiltSystem b = build_system(cfg);
    const MultiscaleParams p = cfg.schedule.at(cfg.eps.front());
    const RngStream rng(cfg.seed, 0);
    SolveOptions opts;
    opts.record_every = cfg.record_every;
    const auto traj = solve_spde(b.sys, p, b.x, cfg.T, cfg.dt, rng, opts);
    const double x_mean = invariant_average(*b.op, b.x);
    const auto ode = solve_limit_ode(*b.model, x_mean, cfg.T, cfg.dt);
    const auto sde = solve_averaged_sde(*b.model, p.gamma(), x_mean, cfg.T, cfg.dt, RngStream(cfg.seed, 1));
    write_csv(out / "trajectory.csv", traj);
    write_csv(out / "limit_ode.csv", ode);
    write_csv(out / "averaged_sde.csv", sde);

    RunResult res;
    res.outputs = {"trajectory.csv", "limit_ode.csv", "averaged_sde.csv"};
    res.summary = {{"eps", p.eps},
                   {"alpha", p.alpha},
                   {"beta", p.beta},
                   {"gamma", p.gamma()},
                   {"final_mean", b.op->constant_value(traj.states.back())},
                   {"final_limit", ode.values.back()},
                   {"averaging_error", averaging_error(*b.op, traj, recorded_reference(*b.model, x_mean, cfg.T, cfg.dt,
                                                                                       cfg.record_every),
                                                       cfg.delta)}};
    write_json(out / "simulate.json", res.summary);
    res.outputs.push_back("simulate.json");
    return res;
}

RunResult run_average(const ExperimentConfig& cfg, const fs::path& out) {
    if (cfg.eps.size() < 2) throw ConfigError("/schedule/eps", "averaging needs at least two eps values");
    const BuiltSystem b = build_system(cfg);
    const double x_mean = invariant_average(*b.op, b.x);
    const ScalarTrajectory ref = recorded_reference(*b.model, x_mean, cfg.T, cfg.dt, cfg.record_every);

    CsvTable table{{"eps", "n_paths", "mean_err", "ci"}, {}};
    json levels = json::array();
    std::vector<double> means, cis;
    RunResult res;
    for (std::size_t level = 0; level < cfg.eps.size(); ++level) {
        const MultiscaleParams p = cfg.schedule.at(cfg.eps[level]);
        std::vector<double> errors(cfg.paths);
        SolveOptions opts;
        opts.record_every = cfg.record_every;
        try {
            parallel_for(cfg.paths, cfg.threads, [&](std::size_t i) {
                const RngStream rng(cfg.seed, static_cast<std::uint64_t>(i) + (static_cast<std::uint64_t>(level) << 32));
                const auto traj = solve_spde(b.sys, p, b.x, cfg.T, cfg.dt, rng, opts);
                errors[i] = averaging_error(*b.op, traj, ref, cfg.delta);
            });
        } catch (const DivergedError&) {
            write_csv(out / "averaging.csv", table);
            throw;
        }
        const double m = mean_of(errors), ci = ci95(errors);
        means.push_back(m);
        cis.push_back(ci);
        table.rows.push_back({fmt_double(p.eps), std::to_string(cfg.paths), fmt_double(m), fmt_double(ci)});
        levels.push_back({{"eps", p.eps}, {"alpha", p.alpha}, {"beta", p.beta}, {"gamma", p.gamma()},
                          {"mean_err", m}, {"ci", ci}});
    }
    write_csv(out / "averaging.csv", table);

    bool monotone = true;
    for (std::size_t i = 1; i < means.size(); ++i)
        if (means[i] > means[i - 1] + cis[i] + cis[i - 1]) monotone = false;
    const bool initial_layer = cfg.delta == 0.0 && b.op->nonconstant_magnitude(b.x) > 0.0;
    res.outputs = {"averaging.csv"};
    res.summary = {{"levels", levels}, {"monotone_within_ci", monotone}, {"delta", cfg.delta},
                   {"initial_layer", initial_layer}};
    write_json(out / "averaging.json", res.summary);
    res.outputs.push_back("averaging.json");
    return res;
}

RunResult run_action(const ExperimentConfig& cfg, const fs::path& out) {
    const BuiltSystem b = build_system(cfg);
    const ScalarPath w = knot_path(cfg);
    RunResult res;
    try {
        const ActionValue a = action_I(*b.model, w);
        const ControlPath phi = minimizing_control(*b.model, w);
        const auto replay = solve_controlled_ode(*b.model, w.values.front(), phi, w.dt());
        double sup = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) sup = std::max(sup, std::abs(replay.values[i] - w.values[i]));
        write_csv(out / "path.csv", w);
        write_csv(out / "control.csv", phi);
        write_csv(out / "controlled_ode.csv", replay);
        res.outputs = {"path.csv", "control.csv", "controlled_ode.csv"};
        res.summary = {{"action", a.value}, {"half_control_norm_sq", 0.5 * phi.l2_norm_sq()},
                       {"replay_sup_error", sup}, {"nodes", w.size()}};
    } catch (const NondegeneracyError& e) {
        res.status = kStatusHypothesis;
        res.summary = {{"error", e.what()}, {"t", e.t()}, {"u", e.u()}, {"H", e.h()}};
    }
    write_json(out / "action.json", res.summary);
    res.outputs.push_back("action.json");
    return res;
}

RunResult run_quasipotential(const ExperimentConfig& cfg, const fs::path& out) {
    const BuiltSystem b = build_system(cfg);
    CsvTable table{{"y", "explicit", "variational"}, {}};
    CsvTable per{{"y", "horizon", "value"}, {}};
    json rows = json::array();
    RunResult res;
    for (std::size_t i = 0; i < cfg.qp_y.size(); ++i) {
        const double y = cfg.qp_y[i];
        const auto qp = quasi_potential_search(*b.model, y, cfg.horizons, cfg.qp_nodes);
        std::string expl;
        json row = {{"y", y}, {"variational", qp.value}};
        if (b.model->is_additive()) {
            const double v = quasi_potential_explicit(*b.model, y);
            expl = fmt_double(v);
            row["explicit"] = v;
        }
        table.rows.push_back({fmt_double(y), expl, fmt_double(qp.value)});
        for (std::size_t h = 0; h < qp.horizons.size(); ++h)
            per.rows.push_back({fmt_double(y), fmt_double(qp.horizons[h]), fmt_double(qp.per_horizon[h])});
        const std::string name = "minimizer_" + std::to_string(i) + ".csv";
        write_csv(out / name, qp.best_path);
        res.outputs.push_back(name);
        rows.push_back(row);
    }
    write_csv(out / "quasipotential.csv", table);
    write_csv(out / "quasipotential_horizons.csv", per);
    res.outputs.push_back("quasipotential.csv");
    res.outputs.push_back("quasipotential_horizons.csv");
    res.summary = {{"values", rows}};
    write_json(out / "quasipotential.json", res.summary);
    res.outputs.push_back("quasipotential.json");
    return res;
}

RunResult run_exit(const ExperimentConfig& cfg, const fs::path& out) {
    RunResult pre = run_check(cfg, out, "exit");
    if (pre.status != kStatusOk) return pre;

    const BuiltSystem b = build_system(cfg);
    const DomainSpec dom = build_domain(cfg.profile, cfg.r, *b.op);
    const double target = v_bar(*b.model, dom.y1, dom.y2, VBarSettings{cfg.horizons, cfg.qp_nodes});
    const auto stats = exit_time_mc(b.sys, cfg.schedule, dom, b.x, cfg.gamma_grid, cfg.exit_paths, target,
                                    mc_settings(cfg));

    RunResult res;
    res.outputs = pre.outputs;
    write_exit_csv(out / "exit.csv", stats);
    res.outputs.push_back("exit.csv");

    CsvTable samples{{"gamma", "path", "tau", "censored"}, {}};
    json levels = json::array();
    for (const auto& s : stats) {
        for (std::size_t p = 0; p < s.samples.size(); ++p)
            samples.rows.push_back({fmt_double(s.gamma), std::to_string(p), fmt_double(s.samples[p]),
                                    std::to_string(s.censored_flags[p])});
        levels.push_back({{"gamma", s.gamma},
                          {"eps", s.eps},
                          {"alpha", s.alpha},
                          {"beta", s.beta},
                          {"n", s.n},
                          {"censored", s.censored},
                          {"diverged", s.diverged},
                          {"t_max", s.t_max},
                          {"mean_tau", s.mean_tau},
                          {"gamma_log_mean", s.gamma_log_mean},
                          {"eps_log_mean", s.eps_log_mean},
                          {"ci_halfwidth", s.ci_halfwidth},
                          {"lower_bound_only", s.lower_bound_only},
                          {"exit_concentration", s.concentration},
                          {"mean_ball_entries", s.mean_ball_entries}});
    }
    write_csv(out / "exit_samples.csv", samples);
    res.outputs.push_back("exit_samples.csv");

    const LinearFit fit = extrapolate_to_zero(stats);
    json summary = {{"v_bar", target},
                    {"section", {dom.y1, dom.y2}},
                    {"levels", levels},
                    {"speed_note",
                     "gamma_log_mean uses gamma(eps) = (alpha + beta)^2 as the speed; eps_log_mean is reported "
                     "alongside because the two normalizations differ"}};
    if (fit.valid) {
        summary["extrapolated"] = fit.intercept;
        summary["slope"] = fit.slope;
        summary["relative_gap"] = std::abs(fit.intercept - target) / target;
    } else {
        summary["extrapolated"] = nullptr;
        summary["note"] = "single gamma level: no extrapolation";
    }
    res.summary = summary;
    write_json(out / "exit_summary.json", summary);
    res.outputs.push_back("exit_summary.json");
    return res;
}

RunResult run_experiment(const ExperimentConfig& cfg, const fs::path& out) {
    const auto start = std::chrono::steady_clock::now();
    fs::create_directories(out);
    const json resolved = to_json(cfg);
    write_json(out / "config.resolved.json", resolved);

    RunResult res;
    try {
        if (cfg.experiment == "check") res = run_check(cfg, out, cfg.check_target);
        else if (cfg.experiment == "simulate") res = run_simulate(cfg, out);
        else if (cfg.experiment == "average") res = run_average(cfg, out);
        else if (cfg.experiment == "action") res = run_action(cfg, out);
        else if (cfg.experiment == "quasipotential") res = run_quasipotential(cfg, out);
        else res = run_exit(cfg, out);
    } catch (const DivergedError& e) {
        res.status = kStatusDiverged;
        res.summary = {{"error", e.what()}, {"step", e.step()}, {"time", e.time()}};
        write_json(out / "diverged.json", res.summary);
        res.outputs.push_back("diverged.json");
    }
    res.outputs.insert(res.outputs.begin(), "config.resolved.json");

    std::uint64_t paths = 0;
    if (cfg.experiment == "average") paths = cfg.paths * cfg.eps.size();
    else if (cfg.experiment == "exit") paths = cfg.exit_paths * cfg.gamma_grid.size();
    else if (cfg.experiment == "simulate") paths = 1;
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(out, sha256_hex(resolved.dump()), res.outputs, wall, paths);
    return res;
}

std::vector<fs::path> emit_plot_data(const fs::path& results) {
    if (!fs::is_directory(results) || fs::is_empty(results))
        throw std::runtime_error("results directory " + results.string() + " is missing or empty");
    const fs::path exit_csv = results / "exit.csv";
    const fs::path avg_csv = results / "averaging.csv";
    const fs::path qp_csv = results / "quasipotential.csv";
    if (!fs::exists(exit_csv) && !fs::exists(avg_csv) && !fs::exists(qp_csv))
        throw std::runtime_error("no exit.csv, averaging.csv or quasipotential.csv in " + results.string());

    std::vector<fs::path> written;
    CsvTable tidy{{"experiment", "parameter", "parameter_value", "statistic", "value"}, {}};
    const fs::path plots = results / "plots";
    if (fs::exists(exit_csv)) {
        const CsvTable t = read_csv(exit_csv);
        CsvTable o{{"gamma", "gamma_log_mean", "ci", "v_bar"}, {}};
        const auto g = t.column("gamma"), m = t.column("gamma_log_mean"), c = t.column("ci_halfwidth"),
                   v = t.column("v_bar_target");
        for (const auto& r : t.rows) {
            o.rows.push_back({r[g], r[m], r[c], r[v]});
            for (const char* stat : {"mean_tau", "gamma_log_mean", "ci_halfwidth", "censored"})
                tidy.rows.push_back({"exit", "gamma", r[g], stat, r[t.column(stat)]});
        }
        write_csv(plots / "exit_scaling.csv", o);
        written.push_back(plots / "exit_scaling.csv");
    }
    if (fs::exists(avg_csv)) {
        const CsvTable t = read_csv(avg_csv);
        CsvTable o{{"eps", "mean_err", "ci"}, {}};
        const auto e = t.column("eps"), m = t.column("mean_err"), c = t.column("ci");
        for (const auto& r : t.rows) {
            o.rows.push_back({r[e], r[m], r[c]});
            tidy.rows.push_back({"average", "eps", r[e], "mean_err", r[m]});
            tidy.rows.push_back({"average", "eps", r[e], "ci", r[c]});
        }
        write_csv(plots / "averaging.csv", o);
        written.push_back(plots / "averaging.csv");
    }
    if (fs::exists(qp_csv)) {
        const CsvTable t = read_csv(qp_csv);
        const auto y = t.column("y"), ex = t.column("explicit"), va = t.column("variational");
        for (const auto& r : t.rows) {
            if (ex < r.size() && !r[ex].empty()) tidy.rows.push_back({"quasipotential", "y", r[y], "explicit", r[ex]});
            tidy.rows.push_back({"quasipotential", "y", r[y], "variational", r[va]});
        }
    }
    write_csv(plots / "long.csv", tidy);
    written.push_back(plots / "long.csv");
    return written;
}

}  // namespace fastexit
