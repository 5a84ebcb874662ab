#pragma once

#include <string>
#include <vector>

#include "fluxlim/cost.hpp"
#include "fluxlim/geometry.hpp"

namespace fluxlim {

/// External potential V on the real line.
class Potential {
public:
    enum class Kind { Zero, Quadratic, DoubleWell, Polynomial };

    static Potential zero();
    static Potential quadratic(double stiffness);
    static Potential double_well(double a);
    static Potential polynomial(std::vector<double> coefficients);

    // `zero`, `quadratic:<k>`, `double_well:<a>` or `poly:p0,p1,...`
    static Potential parse(const std::string& spec);

    Kind kind() const { return kind_; }
    std::string describe() const;

    double value(double x) const;
    double grad(double x) const;
    double hess(double x) const;

    // grows toward both ends of [a, b] (otherwise equilibrium mass piles at the boundary)
    bool confining_on(const Grid1D& grid) const;

private:
    Potential(Kind kind, std::vector<double> coefficients);

    Kind kind_;
    std::vector<double> coef_; // power-series coefficients p0 + p1 x + ...
    double param_ = 0.0;
};

enum class DivergenceSign { NonNegative, NonPositive, Mixed };

const char* to_string(DivergenceSign s);

DensityField gibbs_density(const Potential& v, const Grid1D& grid);

/// div(grad phi*(grad V)) in 1-D: phi*''(V'(x)) V''(x).
double force_flux_divergence(const Potential& v, const CostFunction& cost, double x);

DivergenceSign classify_sign(const Potential& v, const CostFunction& cost, const Grid1D& grid);

} // namespace fluxlim
