#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace fluxlim {

/// Samples of a radial primal profile c~(r) on [0, c], r strictly increasing from 0.
struct RadialProfile {
    std::vector<double> r;
    std::vector<double> phi;

    double radius() const { return r.back(); }
};

RadialProfile load_profile_csv(const std::string& path);

/// Samples c~(r) at n points uniformly on [0, radius].
template <typename F>
RadialProfile sample_profile(F&& fn, double radius, int n)
{
    RadialProfile p;
    p.r.resize(static_cast<std::size_t>(n));
    p.phi.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double r = radius * k / (n - 1);
        p.r[static_cast<std::size_t>(k)] = r;
        p.phi[static_cast<std::size_t>(k)] = fn(r);
    }
    return p;
}

// Throws "profile not convex" (or a shape error) when the samples are unusable.
void validate_profile(const RadialProfile& profile);

/// Result of a direct sup evaluation: value, maximizer and profile curvature there.
struct ConjugateSample {
    double value;
    double argmax;
    double curvature;
};

// sup_{0<=r<=c} (s r - c~(r)) over the samples, refined by a local parabola.
double numerical_conjugate(const RadialProfile& profile, double r_dual);
ConjugateSample conjugate_sample(const RadialProfile& profile, double r_dual);

namespace detail {
struct ConjugateTable;
}

enum class CostKind { Relativistic, ClassicalQuadratic, TabulatedRadial };

/// Radial convex cost phi and its conjugate phi*(z) = f(|z|).
///
/// Every kind is reduced to the radial profile f of the conjugate and its first two
/// derivatives; gradients and Hessians in d <= 3 follow from
///   grad phi*(z) = f'(s) z/s,   hess phi*(z) = f''(s) zz^T/s^2 + f'(s)/s (I - zz^T/s^2).
class CostFunction {
public:
    static CostFunction relativistic(double c);
    static CostFunction classical();
    static CostFunction tabulated(const RadialProfile& profile, int dual_nodes = 256);

    CostKind kind() const;
    std::string describe() const;

    // radial conjugate profile and derivatives, s >= 0
    double dual_radial(double s) const;
    double dual_radial_d1(double s) const;
    double dual_radial_d2(double s) const;

    // 1-D fast paths
    double grad1(double z) const;
    double hess1(double z) const;

    double dual_value(const Eigen::VectorXd& z) const;
    Eigen::VectorXd dual_grad(const Eigen::VectorXd& z) const;
    Eigen::MatrixXd dual_hess(const Eigen::VectorXd& z) const;

    /// Supremum of |grad phi*|; infinity for the classical cost.
    double speed_bound() const;
    double domain_radius() const { return speed_bound(); }
    bool bounded() const;

    // radial primal cost phi(r), +inf outside the domain, and its derivatives
    double primal(double r) const;
    double primal_d1(double r) const;
    double primal_d2(double r) const;

private:
    struct Relativistic {
        double c;
    };
    struct Classical {};
    using Table = std::shared_ptr<const detail::ConjugateTable>;

    explicit CostFunction(std::variant<Relativistic, Classical, Table> kind) : kind_(std::move(kind)) {}

    double tab_inverse_d1(const detail::ConjugateTable& t, double r) const;

    std::variant<Relativistic, Classical, Table> kind_;
};

} // namespace fluxlim
