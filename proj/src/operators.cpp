#include "fluxlim/operators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fluxlim {

namespace {

void require_finite(std::span<const double> xs)
{
    for (double x : xs) {
        if (!std::isfinite(x))
            throw std::domain_error("non-finite field");
    }
}

double superbee(double r)
{
    return std::max({0.0, std::min(2.0 * r, 1.0), std::min(r, 2.0)});
}

// Donor value plus limited slope; `far` is the cell behind the donor, `near` the one across the face.
double limited_face(double far, double donor, double near)
{
    const double back = donor - far;
    const double fwd = near - donor;
    if (back == 0.0)
        return donor;
    return donor + 0.5 * superbee(fwd / back) * back;
}

InterfaceFlux make_flux(const OperatorContext& ctx, double x_left, double x_right, double u_left, double u_right,
                        double u_far_left, double u_far_right)
{
    const double dx = ctx.grid.dx();
    const double ul = std::max(u_left, ctx.positivity_floor);
    const double ur = std::max(u_right, ctx.positivity_floor);

    InterfaceFlux f{};
    f.force_gradient = (ctx.potential.value(x_right) - ctx.potential.value(x_left)) / dx;
    f.log_gradient = (std::log(ur) - std::log(ul)) / dx;
    if (ctx.flux_mode == FluxMode::SeparateArgument)
        f.velocity = -(ctx.cost.grad1(f.force_gradient) + ctx.cost.grad1(f.log_gradient));
    else
        f.velocity = -ctx.cost.grad1(f.force_gradient + f.log_gradient);

    double density;
    switch (ctx.interface_density) {
    case InterfaceDensity::Centered:
        density = 0.5 * (ul + ur);
        break;
    case InterfaceDensity::Limited:
        density = f.velocity > 0.0 ? limited_face(std::max(u_far_left, ctx.positivity_floor), ul, ur)
                                   : limited_face(std::max(u_far_right, ctx.positivity_floor), ur, ul);
        break;
    default:
        density = f.velocity > 0.0 ? ul : ur;
    }
    f.flux = density * f.velocity;
    return f;
}

} // namespace

std::vector<InterfaceFlux> interface_fluxes(const OperatorContext& ctx, const DensityField& u)
{
    if (!(u.grid == ctx.grid))
        throw std::invalid_argument("field grid does not match operator grid");
    require_finite(u.values);
    const Grid1D& g = ctx.grid;
    const int n = g.n_cells();
    std::vector<InterfaceFlux> out(static_cast<std::size_t>(n) + 1);

    // one-sided stencils at the ends reuse the boundary cell as its own far neighbour
    auto at = [&](int i) { return u[std::clamp(i, 0, n - 1)]; };
    for (int i = 0; i + 1 < n; ++i) {
        out[static_cast<std::size_t>(i) + 1] =
            make_flux(ctx, g.center(i), g.center(i + 1), u[i], u[i + 1], at(i - 1), at(i + 2));
    }

    if (ctx.boundary.kind == Boundary::Kind::NoFlux) {
        out.front() = InterfaceFlux{0.0, 0.0, 0.0, 0.0};
        out.back() = InterfaceFlux{0.0, 0.0, 0.0, 0.0};
    } else {
        // ghost cells one spacing outside the domain carry the prescribed densities
        const double gl = ctx.boundary.left;
        const double gr = ctx.boundary.right;
        out.front() = make_flux(ctx, g.center(-1), g.center(0), gl, u[0], gl, at(1));
        out.back() = make_flux(ctx, g.center(n - 1), g.center(n), u[n - 1], gr, at(n - 2), gr);
    }
    return out;
}

DensityField apply_L(const OperatorContext& ctx, const DensityField& u)
{
    const auto fluxes = interface_fluxes(ctx, u);
    const double dx = ctx.grid.dx();
    DensityField rate(ctx.grid);
    for (int i = 0; i < rate.size(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        rate[i] = -(fluxes[k + 1].flux - fluxes[k].flux) / dx;
    }
    return rate;
}

std::vector<double> apply_Q(const OperatorContext& ctx, std::span<const double> w)
{
    const Grid1D& g = ctx.grid;
    const int n = g.n_cells();
    if (static_cast<int>(w.size()) != n)
        throw std::invalid_argument("log-density size does not match operator grid");
    require_finite(w);
    const double dx = g.dx();
    const CostFunction& cost = ctx.cost;
    const Potential& v = ctx.potential;

    std::vector<double> q(static_cast<std::size_t>(n), 0.0);
    for (int i = 1; i + 1 < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double p = (w[k + 1] - w[k - 1]) / (2.0 * dx);
        const double second = (w[k + 1] - 2.0 * w[k] + w[k - 1]) / (dx * dx);
        const double x = g.center(i);
        const double a = cost.hess1(p);
        const double b = p * cost.grad1(p) + p * cost.grad1(v.grad(x)) + force_flux_divergence(v, cost, x);
        q[k] = a * second + b;
    }
    return q;
}

double check_LQ_identity(const OperatorContext& ctx, const DensityField& u)
{
    const DensityField lu = apply_L(ctx, u);
    std::vector<double> w(u.values.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (!(u.values[k] > 0.0))
            throw std::invalid_argument("L/Q identity needs a strictly positive density");
        w[k] = std::log(u.values[k]);
    }
    const auto q = apply_Q(ctx, w);
    double worst = 0.0;
    for (int i = 1; i + 1 < u.size(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        worst = std::max(worst, std::abs(lu[i] - u[i] * q[k]) / (1.0 + std::abs(lu[i])));
    }
    return worst;
}

} // namespace fluxlim
