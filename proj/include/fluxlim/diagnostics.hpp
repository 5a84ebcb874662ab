#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fluxlim/jko.hpp"
#include "fluxlim/operators.hpp"
#include "fluxlim/solver.hpp"

namespace fluxlim {

enum class Verdict { Pass, Fail, HypothesisNotMet };

const char* to_string(Verdict v);

/// Outcome of one numerical principle check.
///
/// Ordering checks (comparison, weak maximum) report the raw margin and pass when
/// margin >= -tolerance; budget checks (residuals, distances) fold the tolerance
/// into the margin (tolerance - measured) and pass when margin >= 0.
struct PrincipleReport {
    std::string check;
    std::vector<std::string> hypotheses;
    double measured = 0.0;
    double margin = 0.0;
    double tolerance = 0.0;
    Verdict verdict = Verdict::Fail;
    std::vector<std::pair<std::string, double>> details;
    std::vector<std::string> notes;

    bool passed() const { return verdict == Verdict::Pass; }
};

nlohmann::ordered_json to_json(const PrincipleReport& r);

enum class Extremum { Maximum, Minimum };

PrincipleReport check_comparison_evolutionary(const Trajectory& u, const Trajectory& v, double tol = 1e-8);

/// Max (div grad phi*(grad V) <= 0) or min (>= 0) attained on the parabolic boundary:
/// the initial snapshot plus the two boundary cells at every snapshot.
PrincipleReport check_weak_max_evolutionary(const Trajectory& traj, Extremum which, double tol = 1e-8);

PrincipleReport check_stationary(const DensityField& u, const OperatorContext& ctx, double tol = 1e-3);

PrincipleReport check_propagation_speed(const Trajectory& traj, double threshold = 1e-10, double slack_cells = 5.0);

/// Runs `base` with Relativistic(c) and with the classical cost and compares at t_end.
PrincipleReport check_classical_limit(const RunConfig& base, double c, const DensityField& u0, double tol = 1e-3);

PrincipleReport check_gibbs_convergence(const Trajectory& traj, double tol = 1e-2);

/// L/Q mismatch at the context grid and at twice its resolution (centred interface density).
PrincipleReport check_lq_identity(const OperatorContext& ctx, const std::function<double(double)>& profile,
                                  double tol = 1e-3, double min_ratio = 3.0);

/// Mass drift per step (NoFlux, before flooring), total flooring injection and the floor bound.
PrincipleReport check_conservation(const Trajectory& traj, double floor, double drift_tol = 1e-12,
                                   double injection_tol = 1e-10);

/// Free energy nonincreasing: per unit time for fv trajectories, per step for jko.
PrincipleReport check_lyapunov(const Trajectory& traj, double tol);

/// Oddness, monotonicity, SPD Hessian, finite-difference consistency and speed saturation
/// on seeded random samples in d = 1, 2, 3.
PrincipleReport check_cost_properties(const CostFunction& cost, std::uint64_t seed, int samples = 1000,
                                      double fd_tol = 1e-6);

/// L1 distance between a JKO trajectory's final snapshot and a finite-volume run to the same time.
PrincipleReport check_jko_crossval(const JkoConfig& jko, const RunConfig& fv, const DensityField& u0, int n_steps,
                                   double tol = 5e-2);

} // namespace fluxlim
