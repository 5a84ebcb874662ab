#pragma once

#include <span>
#include <vector>

#include "fluxlim/cost.hpp"
#include "fluxlim/geometry.hpp"
#include "fluxlim/potential.hpp"

namespace fluxlim {

struct Boundary {
    enum class Kind { NoFlux, Dirichlet };

    Kind kind = Kind::NoFlux;
    double left = 0.0;
    double right = 0.0;

    static Boundary no_flux() { return {}; }
    static Boundary dirichlet(double left, double right) { return {Kind::Dirichlet, left, right}; }
};

// Upwind: donor-cell density. Centered: arithmetic mean (second order for smooth
// fields). Limited: donor cell plus a superbee-limited slope, which keeps the
// saturated fronts of bounded costs sharp.
enum class InterfaceDensity { Upwind, Centered, Limited };

// Separate: div[u grad phi*(grad V)] + div[u grad phi*(grad log u)]  (default)
// Combined: div[u grad phi*(grad log u + grad V)]
enum class FluxMode { SeparateArgument, CombinedArgument };

struct OperatorContext {
    CostFunction cost;
    Potential potential;
    Grid1D grid;
    Boundary boundary = Boundary::no_flux();
    double positivity_floor = 1e-300;
    InterfaceDensity interface_density = InterfaceDensity::Upwind;
    FluxMode flux_mode = FluxMode::SeparateArgument;
};

/// State at one cell interface. `velocity` is the transport velocity of the
/// interface density, so the mass flux is density * velocity (positive = rightward).
struct InterfaceFlux {
    double force_gradient; // (V_{i+1} - V_i) / dx
    double log_gradient;   // (log u_{i+1} - log u_i) / dx
    double velocity;
    double flux;
};

/// Fluxes at all n+1 interfaces, the two domain ends included.
std::vector<InterfaceFlux> interface_fluxes(const OperatorContext& ctx, const DensityField& u);

/// Conservative finite-volume evaluation of Lu.
DensityField apply_L(const OperatorContext& ctx, const DensityField& u);

/// Centred finite-difference evaluation of Qw for w = log u at interior cells
/// (entries 0 and n-1 are left at zero).
std::vector<double> apply_Q(const OperatorContext& ctx, std::span<const double> w);

/// max over interior cells of |Lu - u Q(log u)| / (1 + |Lu|).
double check_LQ_identity(const OperatorContext& ctx, const DensityField& u);

} // namespace fluxlim
