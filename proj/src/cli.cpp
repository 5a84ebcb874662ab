#include "fluxlim/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

namespace fluxlim {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string g17(double v) { return fmt("%.17g", v); }

std::string snapshot_name(double t) { return "snapshot_" + fmt("%.9g", t) + ".csv"; }

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write " + path.string());
    f << text;
}

void write_steps(const fs::path& path, const Trajectory& traj)
{
    const bool jko = traj.integrator == "jko";
    std::ostringstream s;
    s << "step,t,dt,mass,min,max,free_energy,relative_mass_drift";
    if (jko)
        s << ",newton_iterations,max_displacement";
    s << "\n";
    for (std::size_t k = 0; k < traj.steps.size(); ++k) {
        const StepRecord& r = traj.steps[k];
        s << k << ',' << g17(r.t) << ',' << g17(r.dt) << ',' << g17(r.mass) << ',' << g17(r.min) << ','
          << g17(r.max) << ',' << g17(r.free_energy) << ',' << g17(r.relative_mass_drift);
        if (jko) {
            if (k == 0)
                s << ",0,0";
            else
                s << ',' << traj.newton_iterations[k - 1] << ',' << g17(traj.max_displacement[k - 1]);
        }
        s << "\n";
    }
    write_text(path, s.str());
}

const char* kPlotScript = R"(#!/usr/bin/env python3
# Plots the snapshots and step log of this run directory.
import csv
import json
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
meta = json.load(open(os.path.join(here, "meta.json")))


def columns(name):
    with open(os.path.join(here, name)) as f:
        rows = list(csv.DictReader(f))
    return {k: [float(r[k]) for r in rows] for k in rows[0]}


fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(11, 4))
for snap in meta["snapshots"]:
    d = columns(snap["file"])
    ax0.plot(d["x"], d["u"], label="t = %g" % snap["t"])
ax0.set_xlabel("x")
ax0.set_ylabel("u")
if len(meta["snapshots"]) <= 12:
    ax0.legend(fontsize=7)

steps = columns("steps.csv")
ax1.plot(steps["t"], steps["free_energy"])
ax1.set_xlabel("t")
ax1.set_ylabel("free energy")
fig.suptitle(meta["cost"] + ", V = " + meta["potential"])
fig.tight_layout()
out = os.path.join(here, "plot.png")
fig.savefig(out, dpi=120)
if "--show" in sys.argv:
    plt.show()
print(out)
)";

nlohmann::ordered_json base_meta(const ExperimentConfig& cfg, Command cmd, const GlobalOptions& opts)
{
    nlohmann::ordered_json m;
    m["tool"] = "fluxlim";
    m["tool_version"] = kToolVersion;
    m["command"] = cmd == Command::Solve ? "solve" : cmd == Command::Jko ? "jko" : "verify";
    m["config_path"] = cfg.raw.origin;
    m["config"] = render(cfg.raw);
    m["seed"] = opts.seed;
    m["strict_hypotheses"] = opts.strict_hypotheses;
    m["integrator"] = cfg.integrator == Integrator::Jko ? "jko" : "fv";
    m["cost"] = cfg.cost_text;
    m["potential"] = cfg.run.ctx.potential.describe();
    m["initial"] = cfg.initial.text;
    const Grid1D& g = cfg.run.ctx.grid;
    m["grid"] = {{"x_min", g.x_min()}, {"x_max", g.x_max()}, {"n_cells", g.n_cells()}};
    return m;
}

void write_trajectory(const fs::path& dir, const Trajectory& traj, nlohmann::ordered_json& meta)
{
    nlohmann::ordered_json snaps = nlohmann::ordered_json::array();
    for (const Snapshot& s : traj.snapshots) {
        const std::string name = snapshot_name(s.t);
        write_csv((dir / name).string(), s.u);
        snaps.push_back({{"t", s.t}, {"file", name}});
    }
    write_steps(dir / "steps.csv", traj);
    meta["snapshots"] = snaps;
    meta["steps"] = traj.steps.size() - 1;
    meta["initial_mass"] = traj.initial_mass;
    meta["final_mass"] = traj.steps.back().mass;
    meta["floor_injection"] = traj.floor_injection;
    meta["max_relative_mass_drift"] = traj.max_relative_mass_drift;
    meta["min_density"] = traj.min_density;
    if (traj.integrator == "jko")
        meta["newton_iterations"] = traj.newton_iterations;
    meta["notes"] = traj.notes;
    write_text(dir / "plot.py", kPlotScript);
}

bool needs_trajectory(const std::string& check)
{
    return check == "gibbs_convergence" || check == "comparison" || check == "weak_max" || check == "weak_min" ||
           check == "propagation" || check == "conservation" || check == "lyapunov";
}

Trajectory integrate(const ExperimentConfig& cfg, const DensityField& u0)
{
    if (cfg.integrator == Integrator::Jko)
        return jko_run(cfg.jko, u0, cfg.jko_steps);
    return run(cfg.run, u0);
}

PrincipleReport run_check(const CheckSpec& spec, const ExperimentConfig& cfg, const GlobalOptions& opts,
                          const DensityField& u0, const std::optional<Trajectory>& traj)
{
    const std::string& name = spec.name;
    const double tol = spec.tolerance;
    if (name == "stationary") {
        DensityField u = u0;
        for (double& v : u.values)
            v = std::max(v, cfg.run.positivity_floor);
        return check_stationary(u, cfg.run.ctx, tol);
    }
    if (name == "gibbs_convergence")
        return check_gibbs_convergence(*traj, tol);
    if (name == "comparison") {
        DensityField v0 = u0;
        for (double& v : v0.values)
            v += cfg.options.comparison_offset;
        const Trajectory other = integrate(cfg, v0);
        PrincipleReport r = check_comparison_evolutionary(*traj, other, tol);
        r.details.emplace_back("offset", cfg.options.comparison_offset);
        return r;
    }
    if (name == "weak_max")
        return check_weak_max_evolutionary(*traj, Extremum::Maximum, tol);
    if (name == "weak_min")
        return check_weak_max_evolutionary(*traj, Extremum::Minimum, tol);
    if (name == "propagation") {
        PrincipleReport r =
            check_propagation_speed(*traj, cfg.options.propagation_threshold, cfg.options.propagation_slack_cells);
        r.tolerance = tol;
        if (r.verdict != Verdict::HypothesisNotMet)
            r.verdict = r.margin >= -tol ? Verdict::Pass : Verdict::Fail;
        return r;
    }
    if (name == "classical_limit") {
        if (cfg.run.ctx.cost.kind() != CostKind::Relativistic) {
            PrincipleReport r;
            r.check = name;
            r.tolerance = tol;
            r.hypotheses.push_back("FAILED: relativistic cost with finite c");
            r.verdict = Verdict::HypothesisNotMet;
            r.measured = r.margin = std::numeric_limits<double>::quiet_NaN();
            return r;
        }
        return check_classical_limit(cfg.run, cfg.run.ctx.cost.speed_bound(), u0, tol);
    }
    if (name == "lq_identity")
        return check_lq_identity(cfg.run.ctx, initial_profile(cfg), tol);
    if (name == "conservation") {
        PrincipleReport r = check_conservation(*traj, cfg.run.positivity_floor, tol);
        return r;
    }
    if (name == "lyapunov")
        return check_lyapunov(*traj, tol);
    if (name == "cost_properties")
        return check_cost_properties(cfg.run.ctx.cost, opts.seed, cfg.options.cost_samples, tol);
    if (name == "jko_crossval") {
        RunConfig fv = cfg.run;
        fv.ctx.flux_mode = cfg.options.crossval_flux_mode;
        return check_jko_crossval(cfg.jko, fv, u0, cfg.jko_steps, tol);
    }
    throw std::invalid_argument("unknown check " + name);
}

void print_table(std::ostream& out, const std::vector<PrincipleReport>& reports)
{
    char line[200];
    std::snprintf(line, sizeof line, "%-18s %-17s %14s %14s %11s\n", "check", "verdict", "measured", "margin",
                  "tolerance");
    out << line;
    for (const PrincipleReport& r : reports) {
        std::snprintf(line, sizeof line, "%-18s %-17s %14.6e %14.6e %11.3e\n", r.check.c_str(), to_string(r.verdict),
                      r.measured, r.margin, r.tolerance);
        out << line;
        for (const std::string& h : r.hypotheses) {
            if (h.rfind("FAILED: ", 0) == 0)
                out << "  hypothesis not met: " << h.substr(8) << "\n";
        }
        for (const std::string& n : r.notes)
            out << "  " << n << "\n";
    }
}

} // namespace

int exit_code_for(const std::vector<PrincipleReport>& reports, bool strict_hypotheses)
{
    bool fail = false;
    bool unmet = false;
    for (const PrincipleReport& r : reports) {
        fail = fail || r.verdict == Verdict::Fail;
        unmet = unmet || r.verdict == Verdict::HypothesisNotMet;
    }
    if (fail)
        return kExitFail;
    if (unmet && strict_hypotheses)
        return kExitHypothesis;
    return kExitOk;
}

RunOutcome execute(const ExperimentConfig& cfg, Command cmd, const GlobalOptions& opts, const std::string& out_dir,
                   std::ostream& out)
{
    RunOutcome res;
    const auto config_error = [&](const std::string& msg) {
        res.exit_code = kExitConfig;
        res.error = msg;
        return res;
    };
    if (cmd == Command::Solve && cfg.integrator != Integrator::Fv)
        return config_error("`solve` needs run.integrator = fv (use `fluxlim jko`)");
    if (cmd == Command::Jko && cfg.integrator != Integrator::Jko)
        return config_error("`jko` needs run.integrator = jko (use `fluxlim solve`)");
    if (cmd == Command::Verify && cfg.checks.empty())
        return config_error("nothing to verify: the [checks] section is empty");

    DensityField u0(cfg.run.ctx.grid);
    try {
        u0 = make_initial(cfg);
    } catch (const std::exception& e) {
        return config_error(std::string("initial condition: ") + e.what());
    }

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_text(dir / "config.toml", render(cfg.raw));
    nlohmann::ordered_json meta = base_meta(cfg, cmd, opts);

    const bool want_traj = cmd != Command::Verify || std::any_of(cfg.checks.begin(), cfg.checks.end(), [](auto& c) {
                               return needs_trajectory(c.name);
                           });
    std::optional<Trajectory> traj;
    try {
        if (want_traj) {
            traj = integrate(cfg, u0);
            write_trajectory(dir, *traj, meta);
        }

        for (const CheckSpec& c : cfg.checks)
            res.reports.push_back(run_check(c, cfg, opts, u0, traj));
    } catch (const BlowUpError& e) {
        write_csv((dir / "snapshot_last_good.csv").string(), e.last_good());
        meta["error"] = e.what();
        meta["error_time"] = e.time();
        meta["exit_code"] = kExitRuntime;
        write_text(dir / "meta.json", meta.dump(2) + "\n");
        res.exit_code = kExitRuntime;
        res.error = e.what();
        return res;
    } catch (const NewtonFailure& e) {
        meta["error"] = e.what();
        meta["error_gradient_norm"] = e.gradient_norm();
        meta["exit_code"] = kExitRuntime;
        write_text(dir / "meta.json", meta.dump(2) + "\n");
        res.exit_code = kExitRuntime;
        res.error = std::string("Newton failure at ") + e.what();
        return res;
    }

    if (traj) {
        const Trajectory& t = *traj;
        const Snapshot& last = t.final();
        char line[160];
        std::snprintf(line, sizeof line, "%s run: t = %.6g, %zu steps, mass %.15g, min %.3e, max %.6g\n",
                      t.integrator.c_str(), last.t, t.steps.size() - 1, t.steps.back().mass, t.steps.back().min,
                      t.steps.back().max);
        out << line;
        if (t.ctx.boundary.kind == Boundary::Kind::NoFlux) {
            const double d = l1_distance(last.u, gibbs_density(t.ctx.potential, t.ctx.grid));
            out << "final L1 distance to Gibbs: " << fmt("%.6e", d) << "\n";
            meta["final_l1_to_gibbs"] = d;
        }
        if (t.integrator == "jko") {
            int total = 0;
            for (int k : t.newton_iterations)
                total += k;
            out << "Newton iterations: " << total << " over " << t.newton_iterations.size() << " steps\n";
        }
        for (const std::string& n : t.notes)
            out << n << "\n";
    }

    if (cmd == Command::Jko) {
        const auto it = std::find_if(res.reports.begin(), res.reports.end(),
                                     [](const PrincipleReport& r) { return r.check == "jko_crossval"; });
        double d;
        if (it != res.reports.end()) {
            d = it->measured;
        } else {
            RunConfig fv = cfg.run;
            fv.ctx.flux_mode = cfg.options.crossval_flux_mode;
            try {
                d = check_jko_crossval(cfg.jko, fv, u0, cfg.jko_steps).measured;
            } catch (const BlowUpError& e) {
                d = std::numeric_limits<double>::quiet_NaN();
                out << "matched fv run failed: " << e.what() << "\n";
            }
        }
        out << "L1 distance to matched fv run ("
            << (cfg.options.crossval_flux_mode == FluxMode::CombinedArgument ? "combined" : "separate")
            << " flux): " << fmt("%.6e", d) << "\n";
        meta["l1_to_matched_fv"] = d;
    }

    nlohmann::ordered_json report = nlohmann::ordered_json::array();
    for (const PrincipleReport& r : res.reports)
        report.push_back(to_json(r));
    write_text(dir / "report.json", report.dump(2) + "\n");

    res.exit_code = exit_code_for(res.reports, opts.strict_hypotheses);
    meta["exit_code"] = res.exit_code;
    write_text(dir / "meta.json", meta.dump(2) + "\n");

    if (!res.reports.empty())
        print_table(out, res.reports);
    return res;
}

namespace {

void report_config_error(std::ostream& err, const std::string& origin, const ConfigError& e)
{
    err << "error: ";
    if (e.line() > 0)
        err << origin << ":" << e.line() << ":" << e.column() << ": ";
    err << e.what() << "\n";
}

} // namespace

int cmd_run(Command cmd, const std::string& config_path, const GlobalOptions& opts, std::ostream& out,
            std::ostream& err)
{
    ExperimentConfig cfg;
    try {
        cfg = load_experiment(config_path);
    } catch (const ConfigError& e) {
        report_config_error(err, config_path, e);
        return kExitConfig;
    }
    const std::string dir = opts.output_dir.empty() ? cfg.output_dir : opts.output_dir;
    try {
        const RunOutcome r = execute(cfg, cmd, opts, dir, out);
        if (!r.error.empty())
            err << "error: " << r.error << "\n";
        return r.exit_code;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}

std::pair<std::string, std::vector<std::string>> parse_sweep_param(const std::string& text)
{
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("sweep parameter `" + text + "` must look like section.key=v1,v2", 0, 0);
    const std::string key = text.substr(0, eq);
    const std::string rest = text.substr(eq + 1);
    const char sep = rest.find(';') != std::string::npos ? ';' : ',';
    std::vector<std::string> values;
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, sep)) {
        const auto b = item.find_first_not_of(' ');
        const auto e = item.find_last_not_of(' ');
        if (b == std::string::npos)
            throw ConfigError("empty value in sweep parameter `" + text + "`", 0, 0);
        values.push_back(item.substr(b, e - b + 1));
    }
    if (values.empty())
        throw ConfigError("sweep parameter `" + text + "` has no values", 0, 0);
    return {key, values};
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& params, const GlobalOptions& opts,
              std::ostream& out, std::ostream& err)
{
    struct Point {
        std::vector<std::string> values;
        ExperimentConfig cfg;
        RunOutcome outcome;
        std::string log;
    };

    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    std::vector<Point> points;
    std::string base_dir;
    try {
        if (params.empty())
            throw ConfigError("sweep needs at least one --param section.key=v1,v2", 0, 0);
        const RawConfig raw = load_config(config_path);
        const fs::path p(config_path);
        const std::string cfg_dir = p.has_parent_path() ? p.parent_path().string() : ".";
        for (const std::string& s : params)
            axes.push_back(parse_sweep_param(s));

        std::size_t total = 1;
        for (const auto& a : axes)
            total *= a.second.size();
        for (std::size_t k = 0; k < total; ++k) {
            RawConfig r = raw;
            std::vector<std::string> vals;
            std::size_t rem = k;
            // last axis varies fastest
            std::vector<std::size_t> idx(axes.size());
            for (std::size_t a = axes.size(); a-- > 0;) {
                idx[a] = rem % axes[a].second.size();
                rem /= axes[a].second.size();
            }
            for (std::size_t a = 0; a < axes.size(); ++a) {
                override_value(r, axes[a].first, axes[a].second[idx[a]]);
                vals.push_back(axes[a].second[idx[a]]);
            }
            Point pt;
            pt.values = vals;
            try {
                pt.cfg = build_config(r, cfg_dir);
            } catch (const ConfigError& e) {
                std::string where;
                for (std::size_t a = 0; a < axes.size(); ++a)
                    where += (a ? ", " : "") + axes[a].first + "=" + vals[a];
                throw ConfigError("sweep point " + std::to_string(k) + " (" + where + "): " + e.what(), 0, 0);
            }
            points.push_back(std::move(pt));
        }
        base_dir = opts.output_dir.empty() ? points.front().cfg.output_dir : opts.output_dir;
    } catch (const ConfigError& e) {
        report_config_error(err, config_path, e);
        return kExitConfig;
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < points.size(); k = next++) {
            Point& pt = points[k];
            std::ostringstream log;
            const Command cmd = pt.cfg.integrator == Integrator::Jko ? Command::Jko : Command::Solve;
            const std::string dir = (fs::path(base_dir) / ("point_" + std::to_string(k))).string();
            try {
                pt.outcome = execute(pt.cfg, cmd, opts, dir, log);
            } catch (const std::exception& e) {
                pt.outcome.exit_code = kExitRuntime;
                pt.outcome.error = e.what();
            }
            pt.log = log.str();
        }
    };
    const unsigned n_workers =
        std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), static_cast<unsigned>(points.size())));
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_workers; ++w)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();

    std::ostringstream csv;
    csv << "point";
    for (const auto& a : axes)
        csv << ',' << a.first;
    csv << ",check,verdict,measured,margin,tolerance,exit_code,note\n";
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos)
            return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"')
                q += '"';
            q += c;
        }
        return q + "\"";
    };

    bool any_runtime = false;
    bool any_fail = false;
    bool any_unmet = false;
    for (std::size_t k = 0; k < points.size(); ++k) {
        const Point& pt = points[k];
        std::string prefix = std::to_string(k);
        for (const std::string& v : pt.values)
            prefix += "," + quote(v);
        out << "== point " << k;
        for (std::size_t a = 0; a < axes.size(); ++a)
            out << (a ? ", " : ": ") << axes[a].first << "=" << pt.values[a];
        out << " (exit " << pt.outcome.exit_code << ")\n" << pt.log;
        if (!pt.outcome.error.empty()) {
            out << "error: " << pt.outcome.error << "\n";
            csv << prefix << ",run,Error,,,," << pt.outcome.exit_code << ',' << quote(pt.outcome.error) << "\n";
        }
        for (const PrincipleReport& r : pt.outcome.reports) {
            csv << prefix << ',' << r.check << ',' << to_string(r.verdict) << ',' << g17(r.measured) << ','
                << g17(r.margin) << ',' << g17(r.tolerance) << ',' << pt.outcome.exit_code << ",\n";
        }
        any_runtime = any_runtime || pt.outcome.exit_code == kExitRuntime || pt.outcome.exit_code == kExitConfig;
        any_fail = any_fail || pt.outcome.exit_code == kExitFail;
        any_unmet = any_unmet || pt.outcome.exit_code == kExitHypothesis;
    }
    fs::create_directories(base_dir);
    write_text(fs::path(base_dir) / "sweep_summary.csv", csv.str());
    out << "wrote " << (fs::path(base_dir) / "sweep_summary.csv").string() << "\n";

    if (any_runtime)
        return kExitRuntime;
    if (any_fail)
        return kExitFail;
    if (any_unmet)
        return kExitHypothesis;
    return kExitOk;
}

int cli_main(int argc, char** argv)
{
    CLI::App app{"Flux-limited drift-diffusion solver, JKO integrator and principle checks", "fluxlim"};
    app.set_version_flag("--version", std::string("fluxlim ") + kToolVersion);
    app.require_subcommand(1);

    GlobalOptions opts;
    app.add_option("--output-dir", opts.output_dir, "Output directory (overrides [output] dir)");
    app.add_flag("--strict-hypotheses", opts.strict_hypotheses, "Exit 3 when a check's hypothesis is not met");
    app.add_option("--seed", opts.seed, "Seed for randomized property sampling");

    std::string config;
    std::vector<std::string> params;
    auto add = [&](const char* name, const char* help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("config", config, "Experiment config file")->required();
        sub->fallthrough();
        return sub;
    };
    CLI::App* solve = add("solve", "Finite-volume run, outputs and configured checks");
    CLI::App* jko = add("jko", "JKO run, outputs and configured checks");
    CLI::App* verify = add("verify", "Run the configured checks and write report.json");
    CLI::App* sweep = add("sweep", "Cartesian parameter sweep, run concurrently");
    sweep->add_option("--param", params, "section.key=v1,v2,... (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (*solve)
        return cmd_run(Command::Solve, config, opts, std::cout, std::cerr);
    if (*jko)
        return cmd_run(Command::Jko, config, opts, std::cout, std::cerr);
    if (*verify)
        return cmd_run(Command::Verify, config, opts, std::cout, std::cerr);
    return cmd_sweep(config, params, opts, std::cout, std::cerr);
}

} // namespace fluxlim
