#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "fluxlim/geometry.hpp"
#include "fluxlim/operators.hpp"

namespace fluxlim {

struct RunConfig {
    OperatorContext ctx;
    double t_end = 1.0;
    double cfl_factor = 0.4;
    std::vector<double> snapshot_times;
    double positivity_floor = 1e-12;
};

struct Snapshot {
    double t;
    DensityField u;
};

struct StepRecord {
    double t;
    double dt;
    double mass;
    double min;
    double max;
    double free_energy;
    double relative_mass_drift; // before flooring
};

struct Trajectory {
    explicit Trajectory(OperatorContext context) : ctx(std::move(context)) {}

    std::string integrator = "fv";
    OperatorContext ctx;
    std::vector<Snapshot> snapshots;
    std::vector<StepRecord> steps;
    double initial_mass = 0.0;
    double floor_injection = 0.0;
    double max_relative_mass_drift = 0.0;
    double min_density = 0.0;
    std::vector<int> newton_iterations; // jko only
    std::vector<double> max_displacement; // jko only: max |X_j - Xprev_j| per step
    std::vector<std::string> notes;

    const Snapshot& initial() const { return snapshots.front(); }
    const Snapshot& final() const { return snapshots.back(); }
};

class BlowUpError : public std::runtime_error {
public:
    BlowUpError(const std::string& what, double t, DensityField last_good)
        : std::runtime_error(what), t_(t), last_good_(std::move(last_good))
    {
    }
    double time() const { return t_; }
    const DensityField& last_good() const { return last_good_; }

private:
    double t_;
    DensityField last_good_;
};

/// cfl * min(dx / v_max, dx^2 / (2 lambda_max)) over the current interface state.
double stable_dt(const OperatorContext& ctx, const DensityField& u, double cfl_factor);

/// dx * sum(u log u - u + V u), with 0 log 0 = 0.
double free_energy(const OperatorContext& ctx, const DensityField& u);

/// Forward-Euler integration of du/dt = Lu from u0 to config.t_end.
Trajectory run(const RunConfig& config, const DensityField& u0);

} // namespace fluxlim
