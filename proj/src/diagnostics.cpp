#include "fluxlim/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace fluxlim {

const char* to_string(Verdict v)
{
    switch (v) {
    case Verdict::Pass: return "Pass";
    case Verdict::Fail: return "Fail";
    case Verdict::HypothesisNotMet: return "HypothesisNotMet";
    }
    return "?";
}

nlohmann::ordered_json to_json(const PrincipleReport& r)
{
    // non-finite numbers have no JSON literal; null marks them
    auto num = [](double v) -> nlohmann::ordered_json {
        if (std::isfinite(v))
            return v;
        return nullptr;
    };
    nlohmann::ordered_json j;
    j["check"] = r.check;
    j["hypotheses"] = r.hypotheses;
    j["margin"] = num(r.margin);
    j["tolerance"] = num(r.tolerance);
    j["verdict"] = to_string(r.verdict);
    j["measured"] = num(r.measured);
    nlohmann::ordered_json details = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.details)
        details[k] = num(v);
    j["details"] = details;
    if (!r.notes.empty())
        j["notes"] = r.notes;
    return j;
}

namespace {

PrincipleReport hypothesis_failure(PrincipleReport r, const std::string& why)
{
    r.hypotheses.push_back("FAILED: " + why);
    r.verdict = Verdict::HypothesisNotMet;
    r.measured = std::numeric_limits<double>::quiet_NaN();
    r.margin = std::numeric_limits<double>::quiet_NaN();
    return r;
}

void ordering_verdict(PrincipleReport& r)
{
    r.verdict = r.margin >= -r.tolerance ? Verdict::Pass : Verdict::Fail;
}

void budget_verdict(PrincipleReport& r)
{
    r.margin = r.tolerance - r.measured;
    r.verdict = r.margin >= 0.0 ? Verdict::Pass : Verdict::Fail;
}

bool positive(const Trajectory& traj)
{
    for (const Snapshot& s : traj.snapshots) {
        for (double v : s.u.values) {
            if (!(v > 0.0))
                return false;
        }
    }
    return true;
}

// Range of the force-flux divergence sampled at the cell centres.
std::pair<double, double> divergence_range(const OperatorContext& ctx)
{
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int i = 0; i < ctx.grid.n_cells(); ++i) {
        const double d = force_flux_divergence(ctx.potential, ctx.cost, ctx.grid.center(i));
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    return {lo, hi};
}

} // namespace

PrincipleReport check_comparison_evolutionary(const Trajectory& u, const Trajectory& v, double tol)
{
    if (!(u.ctx.grid == v.ctx.grid))
        throw std::invalid_argument("comparison: trajectories live on different grids");
    if (u.snapshots.size() != v.snapshots.size())
        throw std::invalid_argument("comparison: snapshot schedules differ");

    PrincipleReport r;
    r.check = "comparison";
    r.tolerance = tol;

    if (!positive(u) || !positive(v))
        return hypothesis_failure(r, "u, v > 0");
    r.hypotheses.push_back("u, v > 0");

    double initial_gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < u.initial().u.size(); ++i)
        initial_gap = std::min(initial_gap, v.initial().u[i] - u.initial().u[i]);
    if (initial_gap < 0.0)
        return hypothesis_failure(r, "u <= v at t = 0");
    r.hypotheses.push_back("u <= v at t = 0");

    const Boundary& bu = u.ctx.boundary;
    const Boundary& bv = v.ctx.boundary;
    if (bu.kind != bv.kind)
        return hypothesis_failure(r, "compatible boundary data");
    if (bu.kind == Boundary::Kind::Dirichlet && (bu.left > bv.left || bu.right > bv.right))
        return hypothesis_failure(r, "u <= v on the lateral boundary");
    r.hypotheses.push_back(bu.kind == Boundary::Kind::NoFlux ? "no-flux boundary for both"
                                                             : "u <= v on the lateral boundary");

    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < u.snapshots.size(); ++k) {
        if (u.snapshots[k].t != v.snapshots[k].t)
            throw std::invalid_argument("comparison: snapshot times differ");
        const DensityField& a = u.snapshots[k].u;
        const DensityField& b = v.snapshots[k].u;
        for (int i = 0; i < a.size(); ++i)
            margin = std::min(margin, b[i] - a[i]);
    }
    r.measured = margin;
    r.margin = margin;
    r.details = {{"initial_gap", initial_gap}, {"snapshots", static_cast<double>(u.snapshots.size())}};
    ordering_verdict(r);
    return r;
}

PrincipleReport check_weak_max_evolutionary(const Trajectory& traj, Extremum which, double tol)
{
    const bool is_max = which == Extremum::Maximum;
    PrincipleReport r;
    r.check = is_max ? "weak_max" : "weak_min";
    r.tolerance = tol;

    if (!positive(traj))
        return hypothesis_failure(r, "trajectory positive");
    r.hypotheses.push_back("trajectory positive");

    const DivergenceSign sign = classify_sign(traj.ctx.potential, traj.ctx.cost, traj.ctx.grid);
    const auto [div_lo, div_hi] = divergence_range(traj.ctx);
    r.details = {{"divergence_min", div_lo}, {"divergence_max", div_hi}};
    const bool zero_field = div_lo == 0.0 && div_hi == 0.0;
    const bool ok = zero_field || (is_max ? sign == DivergenceSign::NonPositive : sign == DivergenceSign::NonNegative);
    const std::string hyp = is_max ? "div grad phi*(grad V) <= 0" : "div grad phi*(grad V) >= 0";
    if (!ok) {
        r.details.emplace_back("sign_" + std::string(to_string(sign)), 1.0);
        return hypothesis_failure(r, hyp);
    }
    r.hypotheses.push_back(hyp);

    const double sgn = is_max ? 1.0 : -1.0; // minimum check runs on -u
    double boundary_ext = -std::numeric_limits<double>::infinity();
    double all_ext = boundary_ext;
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
        const DensityField& u = traj.snapshots[k].u;
        const int n = u.size();
        for (int i = 0; i < n; ++i) {
            const double v = sgn * u[i];
            all_ext = std::max(all_ext, v);
            if (k == 0 || i == 0 || i == n - 1)
                boundary_ext = std::max(boundary_ext, v);
        }
    }
    r.measured = boundary_ext - all_ext;
    r.margin = r.measured;
    r.details.emplace_back("boundary_extremum", sgn * boundary_ext);
    r.details.emplace_back("global_extremum", sgn * all_ext);
    ordering_verdict(r);
    return r;
}

PrincipleReport check_stationary(const DensityField& u, const OperatorContext& ctx, double tol)
{
    PrincipleReport r;
    r.check = "stationary";
    r.tolerance = tol;
    for (double v : u.values) {
        if (!(v > 0.0))
            return hypothesis_failure(r, "u > 0");
    }
    r.hypotheses.push_back("u > 0");
    const DensityField lu = apply_L(ctx, u);
    double worst = 0.0;
    for (double v : lu.values)
        worst = std::max(worst, std::abs(v));
    r.measured = worst;
    r.details = {{"n_cells", static_cast<double>(u.size())}};
    budget_verdict(r);
    return r;
}

PrincipleReport check_propagation_speed(const Trajectory& traj, double threshold, double slack_cells)
{
    PrincipleReport r;
    r.check = "propagation";
    r.tolerance = 0.0;
    const CostFunction& cost = traj.ctx.cost;
    if (!cost.bounded())
        return hypothesis_failure(r, "bounded cost");
    r.hypotheses.push_back("bounded cost");
    if (traj.ctx.potential.kind() != Potential::Kind::Zero)
        return hypothesis_failure(r, "V = 0");
    r.hypotheses.push_back("V = 0");

    const Grid1D& g = traj.ctx.grid;
    auto support = [&](const DensityField& u) {
        int lo = -1;
        int hi = -1;
        for (int i = 0; i < u.size(); ++i) {
            if (u[i] > threshold) {
                if (lo < 0)
                    lo = i;
                hi = i;
            }
        }
        return std::pair{lo, hi};
    };
    const auto [lo0, hi0] = support(traj.initial().u);
    if (lo0 < 0)
        return hypothesis_failure(r, "initial density exceeds threshold somewhere");
    const double centre = 0.5 * (g.center(lo0) + g.center(hi0));
    const double r0 = 0.5 * (g.center(hi0) - g.center(lo0));
    const double c = cost.speed_bound();
    const double slack = slack_cells * g.dx();

    double margin = std::numeric_limits<double>::infinity();
    double last_radius = r0;
    for (const Snapshot& s : traj.snapshots) {
        const auto [lo, hi] = support(s.u);
        const double radius = std::max(centre - g.center(lo), g.center(hi) - centre);
        margin = std::min(margin, r0 + c * s.t + slack - radius);
        last_radius = radius;
    }
    r.measured = last_radius;
    r.margin = margin;
    r.details = {{"initial_radius", r0}, {"speed_bound", c}, {"final_time", traj.final().t}, {"slack", slack}};
    r.verdict = margin >= 0.0 ? Verdict::Pass : Verdict::Fail;
    return r;
}

PrincipleReport check_classical_limit(const RunConfig& base, double c, const DensityField& u0, double tol)
{
    PrincipleReport r;
    r.check = "classical_limit";
    r.tolerance = tol;
    r.hypotheses.push_back("same V, u0 and t for both runs");
    if (c < 10.0)
        r.notes.push_back("c below 10: the classical limit is not expected to be close");

    RunConfig rel = base;
    rel.ctx.cost = CostFunction::relativistic(c);
    rel.snapshot_times.clear();
    RunConfig cls = rel;
    cls.ctx.cost = CostFunction::classical();
    const Trajectory a = run(rel, u0);
    const Trajectory b = run(cls, u0);
    r.measured = l1_distance(a.final().u, b.final().u);
    r.details = {{"c", c}, {"t", base.t_end}};
    budget_verdict(r);
    return r;
}

PrincipleReport check_gibbs_convergence(const Trajectory& traj, double tol)
{
    PrincipleReport r;
    r.check = "gibbs_convergence";
    r.tolerance = tol;
    if (traj.ctx.boundary.kind != Boundary::Kind::NoFlux)
        return hypothesis_failure(r, "no-flux boundary");
    r.hypotheses.push_back("no-flux boundary");
    if (!traj.ctx.potential.confining_on(traj.ctx.grid))
        r.notes.push_back("warning: potential is not confining on the grid");
    else
        r.hypotheses.push_back("V confining on the grid");

    const DensityField gibbs = gibbs_density(traj.ctx.potential, traj.ctx.grid);
    const double t_end = traj.final().t;
    bool monotone = true;
    double prev = std::numeric_limits<double>::infinity();
    double max_distance = 0.0;
    int k = 0;
    for (const Snapshot& s : traj.snapshots) {
        const double d = l1_distance(s.u, gibbs);
        max_distance = std::max(max_distance, d);
        char key[48];
        std::snprintf(key, sizeof key, "distance[%d]", k++);
        r.details.emplace_back(key, d);
        if (s.t >= 0.1 * t_end) {
            if (d > prev * (1.0 + 1e-12) + 1e-15)
                monotone = false;
            prev = d;
        }
    }
    r.measured = l1_distance(traj.final().u, gibbs);
    r.details.emplace_back("max_distance", max_distance);
    r.details.emplace_back("monotone_after_10pct", monotone ? 1.0 : 0.0);
    if (!monotone)
        r.notes.push_back("distance to Gibbs not monotone after the first 10% of the run");
    budget_verdict(r);
    return r;
}

PrincipleReport check_lq_identity(const OperatorContext& ctx, const std::function<double(double)>& profile,
                                  double tol, double min_ratio)
{
    PrincipleReport r;
    r.check = "lq_identity";
    r.tolerance = tol;
    r.hypotheses.push_back("u > 0 and smooth");

    auto mismatch = [&](const Grid1D& g) {
        OperatorContext c = ctx;
        c.grid = g;
        c.interface_density = InterfaceDensity::Centered;
        DensityField u(g);
        for (int i = 0; i < g.n_cells(); ++i)
            u[i] = profile(g.center(i));
        return check_LQ_identity(c, u);
    };
    const Grid1D& g = ctx.grid;
    const double coarse = mismatch(g);
    const double fine = mismatch(Grid1D(g.x_min(), g.x_max(), 2 * g.n_cells()));
    const double ratio = coarse / fine;
    r.measured = coarse;
    r.details = {{"n", static_cast<double>(g.n_cells())},
                 {"mismatch_n", coarse},
                 {"mismatch_2n", fine},
                 {"ratio", ratio},
                 {"min_ratio", min_ratio}};
    budget_verdict(r);
    if (r.verdict == Verdict::Pass && !(ratio >= min_ratio)) {
        r.verdict = Verdict::Fail;
        r.notes.push_back("refinement ratio below the second-order threshold");
    }
    return r;
}

PrincipleReport check_conservation(const Trajectory& traj, double floor, double drift_tol, double injection_tol)
{
    PrincipleReport r;
    r.check = "conservation";
    r.tolerance = drift_tol;
    if (traj.ctx.boundary.kind != Boundary::Kind::NoFlux)
        return hypothesis_failure(r, "no-flux boundary");
    r.hypotheses.push_back("no-flux boundary");

    if (traj.integrator == "jko") {
        // quantile reconstruction carries unit mass by construction
        double drift = 0.0;
        for (std::size_t k = 1; k < traj.steps.size(); ++k) {
            const double m0 = traj.steps[k - 1].mass;
            drift = std::max(drift, std::abs(traj.steps[k].mass - m0) / m0);
        }
        r.measured = drift;
        r.details = {{"max_relative_mass_drift", drift}};
        budget_verdict(r);
        return r;
    }

    r.measured = traj.max_relative_mass_drift;
    r.details = {{"max_relative_mass_drift", traj.max_relative_mass_drift},
                 {"floor_injection", traj.floor_injection},
                 {"injection_tolerance", injection_tol},
                 {"min_density", traj.min_density},
                 {"floor", floor}};
    budget_verdict(r);
    if (r.verdict == Verdict::Pass && traj.floor_injection > injection_tol) {
        r.verdict = Verdict::Fail;
        r.notes.push_back("flooring injected more mass than allowed");
    }
    if (r.verdict == Verdict::Pass && traj.min_density < floor) {
        r.verdict = Verdict::Fail;
        r.notes.push_back("density dropped below the positivity floor");
    }
    return r;
}

PrincipleReport check_lyapunov(const Trajectory& traj, double tol)
{
    PrincipleReport r;
    r.check = "lyapunov";
    r.tolerance = tol;
    const bool jko = traj.integrator == "jko";
    r.hypotheses.push_back(jko ? "free energy increase per step" : "free energy increase per unit time");

    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < traj.steps.size(); ++k) {
        const StepRecord& s = traj.steps[k];
        const double delta = s.free_energy - traj.steps[k - 1].free_energy;
        if (jko)
            worst = std::max(worst, delta);
        else if (s.dt > 0.0)
            worst = std::max(worst, delta / s.dt);
    }
    r.measured = worst;
    r.details = {{"steps", static_cast<double>(traj.steps.size() - 1)},
                 {"initial_free_energy", traj.steps.front().free_energy},
                 {"final_free_energy", traj.steps.back().free_energy}};
    budget_verdict(r);
    return r;
}

PrincipleReport check_cost_properties(const CostFunction& cost, std::uint64_t seed, int samples, double fd_tol)
{
    PrincipleReport r;
    r.check = "cost_properties";
    r.tolerance = fd_tol;
    r.hypotheses.push_back("convex radial cost");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> radius(0.0, 10.0);
    std::uniform_real_distribution<double> log_huge(1.0, 300.0);
    auto direction = [&](int d) {
        Eigen::VectorXd z(d);
        do {
            for (int k = 0; k < d; ++k)
                z[k] = unit(rng);
        } while (z.norm() < 1e-3);
        return Eigen::VectorXd(z.normalized());
    };
    auto draw = [&](int d) { return Eigen::VectorXd(direction(d) * radius(rng)); };

    double odd = 0.0;
    double mono = std::numeric_limits<double>::infinity();
    double min_eig = std::numeric_limits<double>::infinity();
    double fd_grad = 0.0;
    double fd_hess = 0.0;
    double saturation = -std::numeric_limits<double>::infinity();
    for (int d = 1; d <= 3; ++d) {
        for (int s = 0; s < samples; ++s) {
            const Eigen::VectorXd z = draw(d);
            const Eigen::VectorXd w = draw(d);
            const Eigen::VectorXd g = cost.dual_grad(z);
            odd = std::max(odd, (cost.dual_grad(-z) + g).norm() / (1.0 + g.norm()));
            const double inner = (g - cost.dual_grad(w)).dot(z - w);
            mono = std::min(mono, inner);

            const Eigen::MatrixXd hm = cost.dual_hess(z);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hm, Eigen::EigenvaluesOnly);
            min_eig = std::min(min_eig, es.eigenvalues().minCoeff());

            const double h = 1e-4;
            for (int k = 0; k < d; ++k) {
                Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
                e[k] = h;
                const double fd = (cost.dual_value(z + e) - cost.dual_value(z - e)) / (2.0 * h);
                fd_grad = std::max(fd_grad, std::abs(fd - g[k]) / (1.0 + std::abs(g[k])));
                const Eigen::VectorXd col = (cost.dual_grad(z + e) - cost.dual_grad(z - e)) / (2.0 * h);
                fd_hess = std::max(fd_hess, (col - hm.col(k)).cwiseAbs().maxCoeff() / (1.0 + hm.col(k).norm()));
            }
            if (cost.bounded()) {
                const Eigen::VectorXd far = direction(d) * std::pow(10.0, log_huge(rng));
                for (const Eigen::VectorXd& q : {z, far})
                    saturation = std::max(saturation, cost.dual_grad(q).norm() - cost.speed_bound() * (1.0 - 1e-15));
            }
        }
    }

    const double fd = std::max(fd_grad, fd_hess);
    r.measured = fd;
    r.details = {{"samples_per_dimension", static_cast<double>(samples)},
                 {"seed", static_cast<double>(seed)},
                 {"oddness_error", odd},
                 {"min_monotonicity_product", mono},
                 {"min_hessian_eigenvalue", min_eig},
                 {"fd_gradient_error", fd_grad},
                 {"fd_hessian_error", fd_hess}};
    if (cost.bounded())
        r.details.emplace_back("speed_excess", saturation);

    budget_verdict(r);
    auto fail = [&](const char* why) {
        r.verdict = Verdict::Fail;
        r.notes.emplace_back(why);
    };
    if (odd > 1e-12)
        fail("gradient not odd");
    if (mono < 0.0)
        fail("gradient not monotone");
    if (!(min_eig > 0.0))
        fail("Hessian not positive definite");
    if (cost.bounded() && saturation > 0.0)
        fail("gradient exceeds the speed bound");

    if (cost.kind() == CostKind::Relativistic) {
        const double c = cost.speed_bound();
        const RadialProfile profile = sample_profile([&](double x) { return cost.primal(x); }, c, 4001);
        std::uniform_real_distribution<double> mag(0.0, 5.0 * c);
        double legendre = 0.0;
        for (int s = 0; s < samples; ++s) {
            const double q = mag(rng);
            const double exact = cost.dual_radial(q);
            legendre = std::max(legendre, std::abs(numerical_conjugate(profile, q) - exact) / (1.0 + exact));
        }
        r.details.emplace_back("legendre_error", legendre);
        if (legendre > fd_tol)
            fail("numerical Legendre transform disagrees with the closed form");
    }
    return r;
}

PrincipleReport check_jko_crossval(const JkoConfig& jko, const RunConfig& fv, const DensityField& u0, int n_steps,
                                   double tol)
{
    PrincipleReport r;
    r.check = "jko_crossval";
    r.tolerance = tol;
    r.hypotheses.push_back("same cost, V and u0 for both integrators");
    if (jko.potential.kind() == Potential::Kind::DoubleWell)
        r.notes.push_back("caveat: potential not convex; JKO steps may be local minima");

    const Trajectory a = jko_run(jko, u0, n_steps);
    RunConfig cfg = fv;
    cfg.t_end = n_steps * jko.h;
    cfg.snapshot_times.clear();
    cfg.ctx.cost = jko.cost;
    cfg.ctx.potential = jko.potential;
    const Trajectory b = run(cfg, u0);
    r.measured = l1_distance(a.final().u, b.final().u);

    const double max_disp =
        a.max_displacement.empty() ? 0.0 : *std::max_element(a.max_displacement.begin(), a.max_displacement.end());
    r.details = {{"t", cfg.t_end},
                 {"l1_distance", r.measured},
                 {"combined_mode", cfg.ctx.flux_mode == FluxMode::CombinedArgument ? 1.0 : 0.0},
                 {"max_newton_iterations",
                  a.newton_iterations.empty()
                      ? 0.0
                      : static_cast<double>(*std::max_element(a.newton_iterations.begin(), a.newton_iterations.end()))}};
    if (jko.cost.bounded()) {
        r.details.emplace_back("max_displacement", max_disp);
        r.details.emplace_back("displacement_bound", jko.cost.speed_bound() * jko.h);
    }
    for (const std::string& n : a.notes)
        r.notes.push_back(n);
    budget_verdict(r);
    return r;
}

} // namespace fluxlim
