#include "fluxlim/jko.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <limits>

#include "fluxlim/numeric.hpp"

namespace fluxlim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool strictly_increasing(std::span<const double> x)
{
    for (std::size_t j = 1; j < x.size(); ++j) {
        if (!(x[j] > x[j - 1]))
            return false;
    }
    return true;
}

double objective(const JkoConfig& cfg, std::span<const double> x, std::span<const double> xp, JkoTerms* terms)
{
    const std::size_t m = x.size();
    const double inv_m = 1.0 / static_cast<double>(m);
    KahanSum ent;
    KahanSum pot;
    KahanSum tr;
    for (std::size_t j = 0; j < m; ++j) {
        if (j + 1 < m) {
            const double gap = x[j + 1] - x[j];
            if (!(gap > 0.0))
                return kInf;
            ent += std::log(static_cast<double>(m) * gap);
        }
        pot += cfg.potential.value(x[j]);
        const double c = cfg.cost.primal((x[j] - xp[j]) / cfg.h);
        if (!std::isfinite(c))
            return kInf;
        tr += c;
    }
    const JkoTerms t{-inv_m * ent.value() - 1.0, inv_m * pot.value(), cfg.h * inv_m * tr.value()};
    if (terms)
        *terms = t;
    return t.total();
}

struct Tridiagonal {
    std::vector<double> diag;
    std::vector<double> off; // off[j] couples j and j+1
};

Tridiagonal hessian(const JkoConfig& cfg, std::span<const double> x, std::span<const double> xp)
{
    const std::size_t m = x.size();
    const double inv_m = 1.0 / static_cast<double>(m);
    Tridiagonal hs{std::vector<double>(m, 0.0), std::vector<double>(m - 1, 0.0)};
    for (std::size_t j = 0; j + 1 < m; ++j) {
        const double gap = x[j + 1] - x[j];
        const double w = inv_m / (gap * gap);
        hs.diag[j] += w;
        hs.diag[j + 1] += w;
        hs.off[j] -= w;
    }
    for (std::size_t j = 0; j < m; ++j) {
        hs.diag[j] += inv_m * cfg.potential.hess(x[j]);
        hs.diag[j] += inv_m / cfg.h * cfg.cost.primal_d2((x[j] - xp[j]) / cfg.h);
    }
    return hs;
}

// LDL^T solve of H d = rhs; returns false when a pivot is not positive.
bool solve_spd(const Tridiagonal& hs, std::span<const double> rhs, std::vector<double>& out)
{
    const std::size_t m = hs.diag.size();
    std::vector<double> d(m);
    std::vector<double> l(m, 0.0);
    d[0] = hs.diag[0];
    if (!(d[0] > 0.0))
        return false;
    for (std::size_t j = 1; j < m; ++j) {
        l[j] = hs.off[j - 1] / d[j - 1];
        d[j] = hs.diag[j] - l[j] * hs.off[j - 1];
        if (!(d[j] > 0.0) || !std::isfinite(d[j]))
            return false;
    }
    out.assign(rhs.begin(), rhs.end());
    for (std::size_t j = 1; j < m; ++j)
        out[j] -= l[j] * out[j - 1];
    for (std::size_t j = 0; j < m; ++j)
        out[j] /= d[j];
    for (std::size_t j = m - 1; j-- > 0;)
        out[j] -= l[j + 1] * out[j + 1];
    return true;
}

double norm2(std::span<const double> v)
{
    KahanSum acc;
    for (double x : v)
        acc += x * x;
    return std::sqrt(acc.value());
}

} // namespace

void validate(const JkoConfig& cfg)
{
    if (!(cfg.h > 0.0))
        throw std::invalid_argument("JKO time step h must be positive");
    if (cfg.n_quantiles < 8)
        throw std::invalid_argument("M too small (need at least 8 quantiles)");
    if (!(cfg.newton_tol > 0.0) || cfg.max_newton_iters < 1)
        throw std::invalid_argument("bad Newton tolerance or iteration limit");
}

JkoTerms jko_terms(const JkoConfig& cfg, const QuantileField& x, const QuantileField& x_prev)
{
    if (x.size() != x_prev.size())
        throw std::invalid_argument("quantile fields differ in size");
    JkoTerms t{kInf, kInf, kInf};
    objective(cfg, x.positions(), x_prev.positions(), &t);
    return t;
}

double jko_objective(const JkoConfig& cfg, const QuantileField& x, const QuantileField& x_prev)
{
    if (x.size() != x_prev.size())
        throw std::invalid_argument("quantile fields differ in size");
    return objective(cfg, x.positions(), x_prev.positions(), nullptr);
}

std::vector<double> jko_gradient(const JkoConfig& cfg, std::span<const double> x, std::span<const double> xp)
{
    const std::size_t m = x.size();
    const double inv_m = 1.0 / static_cast<double>(m);
    std::vector<double> g(m, 0.0);
    for (std::size_t j = 0; j + 1 < m; ++j) {
        const double w = inv_m / (x[j + 1] - x[j]);
        g[j] += w;
        g[j + 1] -= w;
    }
    for (std::size_t j = 0; j < m; ++j) {
        g[j] += inv_m * cfg.potential.grad(x[j]);
        g[j] += inv_m * cfg.cost.primal_d1((x[j] - xp[j]) / cfg.h);
    }
    return g;
}

JkoStepResult jko_step(const JkoConfig& cfg, const QuantileField& x_prev)
{
    validate(cfg);
    const auto xp = x_prev.positions();
    if (static_cast<int>(xp.size()) != cfg.n_quantiles)
        throw std::invalid_argument("previous quantile field has the wrong size");

    std::vector<double> x(xp.begin(), xp.end());
    double f = objective(cfg, x, xp, nullptr);
    std::vector<double> g = jko_gradient(cfg, x, xp);
    double gnorm = norm2(g);
    bool all_pd = true;
    std::vector<double> dir;
    std::vector<double> trial(x.size());

    int iter = 0;
    while (gnorm > cfg.newton_tol) {
        if (iter >= cfg.max_newton_iters) {
            char msg[128];
            std::snprintf(msg, sizeof msg, "Newton failed after %d iterations (gradient norm %.3e)", iter, gnorm);
            throw NewtonFailure(msg, x, gnorm);
        }
        ++iter;

        Tridiagonal hs = hessian(cfg, x, xp);
        std::vector<double> rhs(g.size());
        std::transform(g.begin(), g.end(), rhs.begin(), [](double v) { return -v; });
        if (!solve_spd(hs, rhs, dir)) {
            all_pd = false;
            // Levenberg shift until the model is convex
            double shift = 1e-8 * (1.0 + *std::max_element(hs.diag.begin(), hs.diag.end()));
            const Tridiagonal base = hs;
            do {
                hs = base;
                for (double& d : hs.diag)
                    d += shift;
                shift *= 10.0;
            } while (!solve_spd(hs, rhs, dir));
        }

        double slope = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j)
            slope += g[j] * dir[j];
        const bool roundoff_regime = std::abs(slope) <= 1e-13 * (1.0 + std::abs(f));

        double alpha = 1.0;
        bool accepted = false;
        double f_new = kInf;
        std::vector<double> g_new;
        while (alpha > 1e-20) {
            for (std::size_t j = 0; j < x.size(); ++j)
                trial[j] = x[j] + alpha * dir[j];
            if (strictly_increasing(trial)) {
                f_new = objective(cfg, trial, xp, nullptr);
                if (std::isfinite(f_new)) {
                    if (f_new <= f + 1e-4 * alpha * slope) {
                        accepted = true;
                    } else if (roundoff_regime) {
                        g_new = jko_gradient(cfg, trial, xp);
                        accepted = norm2(g_new) < gnorm;
                    }
                }
            }
            if (accepted)
                break;
            alpha *= 0.5;
        }
        if (!accepted) {
            char msg[128];
            std::snprintf(msg, sizeof msg, "line search failed at iteration %d (gradient norm %.3e)", iter, gnorm);
            throw NewtonFailure(msg, x, gnorm);
        }
        x = trial;
        f = f_new;
        g = g_new.empty() ? jko_gradient(cfg, x, xp) : std::move(g_new);
        gnorm = norm2(g);
    }

    // convexity witness at the returned point
    std::vector<double> probe;
    std::vector<double> zeros(x.size(), 0.0);
    all_pd = all_pd && solve_spd(hessian(cfg, x, xp), zeros, probe);
    return {QuantileField(std::move(x)), iter, gnorm, all_pd};
}

Trajectory jko_run(const JkoConfig& cfg, const DensityField& u0, int n_steps)
{
    validate(cfg);
    if (n_steps < 0)
        throw std::invalid_argument("n_steps must be nonnegative");
    const Grid1D& grid = u0.grid;
    Trajectory traj(OperatorContext{cfg.cost, cfg.potential, grid});
    traj.integrator = "jko";

    const double m0 = mass(u0);
    traj.initial_mass = m0;
    if (std::abs(m0 - 1.0) > 1e-12) {
        char note[96];
        std::snprintf(note, sizeof note, "initial density renormalized from mass %.17g", m0);
        traj.notes.emplace_back(note);
    }

    QuantileField x = density_to_quantiles(u0, cfg.n_quantiles);

    auto record = [&](double t, double dt, const QuantileField& q) {
        DensityField u = quantiles_to_density(q, grid);
        const auto [lo, hi] = std::minmax_element(u.values.begin(), u.values.end());
        const double f = jko_terms(cfg, q, q).free_energy();
        traj.steps.push_back({t, dt, mass(u), *lo, *hi, f, 0.0});
        traj.snapshots.push_back({t, std::move(u)});
    };
    record(0.0, 0.0, x);
    traj.min_density = traj.steps.back().min;

    bool nonconvex = false;
    for (int k = 1; k <= n_steps; ++k) {
        JkoStepResult step = [&] {
            try {
                return jko_step(cfg, x);
            } catch (const NewtonFailure& e) {
                throw NewtonFailure("step " + std::to_string(k) + ": " + e.what(), e.last_iterate(),
                                    e.gradient_norm());
            }
        }();
        double disp = 0.0;
        for (int j = 0; j < x.size(); ++j)
            disp = std::max(disp, std::abs(step.x[j] - x[j]));
        traj.max_displacement.push_back(disp);
        if (!step.hessian_positive_definite)
            nonconvex = true;
        for (double xj : step.x.positions())
            nonconvex = nonconvex || cfg.potential.hess(xj) < 0.0;
        traj.newton_iterations.push_back(step.iterations);
        x = std::move(step.x);
        record(k * cfg.h, cfg.h, x);
        traj.min_density = std::min(traj.min_density, traj.steps.back().min);
    }
    if (nonconvex)
        traj.notes.emplace_back("caveat: potential not convex on the support; steps may be local minima");
    return traj;
}

} // namespace fluxlim
