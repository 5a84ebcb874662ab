#include "fluxlim/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "fluxlim/numeric.hpp"

namespace fluxlim {

double stable_dt(const OperatorContext& ctx, const DensityField& u, double cfl_factor)
{
    const auto fluxes = interface_fluxes(ctx, u);
    const bool no_flux = ctx.boundary.kind == Boundary::Kind::NoFlux;
    const std::size_t first = no_flux ? 1 : 0;
    const std::size_t last = no_flux ? fluxes.size() - 1 : fluxes.size();

    double v_max = 0.0;
    double lambda_max = 0.0;
    for (std::size_t k = first; k < last; ++k) {
        const InterfaceFlux& f = fluxes[k];
        v_max = std::max(v_max, std::abs(f.velocity));
        if (ctx.flux_mode == FluxMode::SeparateArgument) {
            lambda_max = std::max({lambda_max, ctx.cost.hess1(f.force_gradient), ctx.cost.hess1(f.log_gradient)});
        } else {
            lambda_max = std::max(lambda_max, ctx.cost.hess1(f.force_gradient + f.log_gradient));
        }
    }
    const double dx = ctx.grid.dx();
    const double inf = std::numeric_limits<double>::infinity();
    const double dt_hyp = v_max > 0.0 ? dx / v_max : inf;
    const double dt_par = lambda_max > 0.0 ? dx * dx / (2.0 * lambda_max) : inf;
    return cfl_factor * std::min(dt_hyp, dt_par);
}

double free_energy(const OperatorContext& ctx, const DensityField& u)
{
    KahanSum acc;
    for (int i = 0; i < u.size(); ++i) {
        const double v = u[i];
        const double entropy = v > 0.0 ? v * std::log(v) - v : 0.0;
        acc += entropy + ctx.potential.value(u.grid.center(i)) * v;
    }
    return u.grid.dx() * acc.value();
}

namespace {

struct FieldStats {
    double mass;
    double min;
    double max;
};

FieldStats stats(const DensityField& u)
{
    const auto [lo, hi] = std::minmax_element(u.values.begin(), u.values.end());
    return {mass(u), *lo, *hi};
}

std::vector<double> snapshot_schedule(const RunConfig& cfg)
{
    std::vector<double> times;
    times.push_back(0.0);
    for (double t : cfg.snapshot_times) {
        if (t < 0.0 || t > cfg.t_end)
            throw std::invalid_argument("snapshot times must lie in [0, t_end]");
        times.push_back(t);
    }
    times.push_back(cfg.t_end);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    return times;
}

} // namespace

Trajectory run(const RunConfig& cfg, const DensityField& u0)
{
    if (!(cfg.t_end > 0.0))
        throw std::invalid_argument("t_end must be positive");
    if (!(cfg.cfl_factor > 0.0 && cfg.cfl_factor <= 1.0))
        throw std::invalid_argument("cfl_factor must lie in (0, 1]");
    if (!(cfg.positivity_floor > 0.0))
        throw std::invalid_argument("positivity floor must be positive");
    if (!(u0.grid == cfg.ctx.grid))
        throw std::invalid_argument("initial field grid does not match the run grid");
    for (double v : u0.values) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("initial density must be finite and nonnegative");
    }

    const double dx = u0.grid.dx();
    Trajectory traj(cfg.ctx);
    traj.initial_mass = mass(u0);
    if (!(traj.initial_mass > 0.0))
        throw std::invalid_argument("initial density has zero mass");

    DensityField u = u0;
    for (double& v : u.values) {
        if (v < cfg.positivity_floor) {
            traj.floor_injection += (cfg.positivity_floor - v) * dx;
            v = cfg.positivity_floor;
        }
    }

    const std::vector<double> schedule = snapshot_schedule(cfg);
    traj.snapshots.push_back({0.0, u});
    FieldStats st = stats(u);
    traj.min_density = st.min;
    traj.steps.push_back({0.0, 0.0, st.mass, st.min, st.max, free_energy(cfg.ctx, u), 0.0});

    double t = 0.0;
    std::size_t next = 1;
    DensityField rate(u.grid);
    while (next < schedule.size()) {
        const double target = schedule[next];
        double dt = stable_dt(cfg.ctx, u, cfg.cfl_factor);
        if (!std::isfinite(dt))
            dt = target - t;
        bool lands = false;
        if (t + dt >= target * (1.0 - 1e-14)) {
            dt = target - t;
            lands = true;
        }
        if (dt < 1e-15 && !lands) {
            char msg[96];
            std::snprintf(msg, sizeof msg, "stiffness collapse at t=%.17g (dt=%.3g)", t, dt);
            throw BlowUpError(msg, t, u);
        }

        rate = apply_L(cfg.ctx, u);
        const double mass_before = st.mass;
        DensityField trial = u;
        bool finite = true;
        for (int i = 0; i < u.size(); ++i) {
            trial[i] = u[i] + dt * rate[i];
            finite = finite && std::isfinite(trial[i]);
        }
        if (!finite) {
            char msg[96];
            std::snprintf(msg, sizeof msg, "blow-up detected at t=%.17g", t);
            throw BlowUpError(msg, t, u);
        }

        const double mass_after = mass(trial);
        const double drift = std::abs(mass_after - mass_before) / mass_before;
        if (cfg.ctx.boundary.kind == Boundary::Kind::NoFlux)
            traj.max_relative_mass_drift = std::max(traj.max_relative_mass_drift, drift);

        for (double& v : trial.values) {
            if (v < cfg.positivity_floor) {
                traj.floor_injection += (cfg.positivity_floor - v) * dx;
                v = cfg.positivity_floor;
            }
        }
        u = std::move(trial);
        t = lands ? target : t + dt;

        st = stats(u);
        traj.min_density = std::min(traj.min_density, st.min);
        traj.steps.push_back({t, dt, st.mass, st.min, st.max, free_energy(cfg.ctx, u), drift});
        if (lands) {
            traj.snapshots.push_back({t, u});
            ++next;
        }
    }
    return traj;
}

} // namespace fluxlim
