#pragma once

#include <stdexcept>
#include <vector>

#include "fluxlim/cost.hpp"
#include "fluxlim/geometry.hpp"
#include "fluxlim/potential.hpp"
#include "fluxlim/solver.hpp"

namespace fluxlim {

struct JkoConfig {
    CostFunction cost;
    Potential potential;
    double h = 0.01;
    int n_quantiles = 200;
    double newton_tol = 1e-10;
    int max_newton_iters = 100;
};

void validate(const JkoConfig& cfg);

/// Terms of the minimization objective in quantile coordinates.
struct JkoTerms {
    double entropy;   // -(1/M) sum log(M dX) - 1
    double potential; // (1/M) sum V(X_j)
    double transport; // h (1/M) sum phi((X_j - Xprev_j) / h)

    double free_energy() const { return entropy + potential; }
    double total() const { return entropy + potential + transport; }
};

JkoTerms jko_terms(const JkoConfig& cfg, const QuantileField& x, const QuantileField& x_prev);

/// Objective value; +infinity when a displacement leaves the cost domain.
double jko_objective(const JkoConfig& cfg, const QuantileField& x, const QuantileField& x_prev);

/// Objective gradient with respect to the positions.
std::vector<double> jko_gradient(const JkoConfig& cfg, std::span<const double> x, std::span<const double> x_prev);

struct JkoStepResult {
    QuantileField x;
    int iterations;
    double gradient_norm;
    bool hessian_positive_definite; // at every accepted iterate
};

class NewtonFailure : public std::runtime_error {
public:
    NewtonFailure(const std::string& what, std::vector<double> last, double gradient_norm)
        : std::runtime_error(what), last_(std::move(last)), gradient_norm_(gradient_norm)
    {
    }
    const std::vector<double>& last_iterate() const { return last_; }
    double gradient_norm() const { return gradient_norm_; }

private:
    std::vector<double> last_;
    double gradient_norm_;
};

/// One minimization step by damped Newton with backtracking.
JkoStepResult jko_step(const JkoConfig& cfg, const QuantileField& x_prev);

/// n_steps JKO steps from u0; snapshots are reconstructed on u0's grid at t_k = k h.
Trajectory jko_run(const JkoConfig& cfg, const DensityField& u0, int n_steps);

} // namespace fluxlim
