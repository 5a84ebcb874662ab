#include "fluxlim/potential.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fluxlim/numeric.hpp"

namespace fluxlim {

namespace {

double parse_number(const std::string& text, const std::string& spec)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("bad number '" + text + "' in potential spec '" + spec + "'");
    }
    if (used != text.size() || !std::isfinite(v))
        throw std::invalid_argument("bad number '" + text + "' in potential spec '" + spec + "'");
    return v;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

} // namespace

Potential::Potential(Kind kind, std::vector<double> coefficients) : kind_(kind), coef_(std::move(coefficients))
{
    while (coef_.size() < 3)
        coef_.push_back(0.0);
}

Potential Potential::zero()
{
    return Potential(Kind::Zero, {});
}

Potential Potential::quadratic(double stiffness)
{
    if (!(stiffness > 0.0))
        throw std::invalid_argument("quadratic potential needs stiffness > 0");
    Potential p(Kind::Quadratic, {0.0, 0.0, 0.5 * stiffness});
    p.param_ = stiffness;
    return p;
}

Potential Potential::double_well(double a)
{
    // (x^2 - a^2)^2 / 4 = a^4/4 - a^2 x^2 / 2 + x^4 / 4
    Potential p(Kind::DoubleWell, {0.25 * a * a * a * a, 0.0, -0.5 * a * a, 0.0, 0.25});
    p.param_ = a;
    return p;
}

Potential Potential::polynomial(std::vector<double> coefficients)
{
    if (coefficients.empty())
        throw std::invalid_argument("polynomial potential needs coefficients");
    for (double c : coefficients) {
        if (!std::isfinite(c))
            throw std::invalid_argument("polynomial coefficients must be finite");
    }
    return Potential(Kind::Polynomial, std::move(coefficients));
}

Potential Potential::parse(const std::string& raw)
{
    const std::string spec = trim(raw);
    const auto colon = spec.find(':');
    const std::string head = trim(spec.substr(0, colon));
    const std::string body = colon == std::string::npos ? std::string{} : spec.substr(colon + 1);
    if (head == "zero" && colon == std::string::npos)
        return zero();
    if (colon != std::string::npos && trim(body).empty())
        throw std::invalid_argument("missing parameter in potential spec '" + spec + "'");
    if (head == "quadratic")
        return quadratic(body.empty() ? 1.0 : parse_number(trim(body), spec));
    if (head == "double_well")
        return double_well(body.empty() ? 1.0 : parse_number(trim(body), spec));
    if (head == "poly") {
        std::vector<double> coefs;
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ','))
            coefs.push_back(parse_number(trim(item), spec));
        return polynomial(std::move(coefs));
    }
    throw std::invalid_argument("unknown potential '" + spec + "'");
}

std::string Potential::describe() const
{
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
    case Kind::Zero:
        return "zero";
    case Kind::Quadratic:
        os << "quadratic:" << param_;
        return os.str();
    case Kind::DoubleWell:
        os << "double_well:" << param_;
        return os.str();
    case Kind::Polynomial:
        os << "poly:";
        for (std::size_t i = 0; i < coef_.size(); ++i)
            os << (i ? "," : "") << coef_[i];
        return os.str();
    }
    return {};
}

double Potential::value(double x) const
{
    double acc = 0.0;
    for (auto it = coef_.rbegin(); it != coef_.rend(); ++it)
        acc = acc * x + *it;
    return acc;
}

double Potential::grad(double x) const
{
    double acc = 0.0;
    for (std::size_t i = coef_.size() - 1; i >= 1; --i)
        acc = acc * x + static_cast<double>(i) * coef_[i];
    return acc;
}

double Potential::hess(double x) const
{
    double acc = 0.0;
    for (std::size_t i = coef_.size() - 1; i >= 2; --i)
        acc = acc * x + static_cast<double>(i * (i - 1)) * coef_[i];
    return acc;
}

bool Potential::confining_on(const Grid1D& grid) const
{
    const double mid = 0.5 * (grid.x_min() + grid.x_max());
    const double v_mid = value(mid);
    return value(grid.x_min()) > v_mid && value(grid.x_max()) > v_mid;
}

const char* to_string(DivergenceSign s)
{
    switch (s) {
    case DivergenceSign::NonNegative:
        return "NonNegative";
    case DivergenceSign::NonPositive:
        return "NonPositive";
    case DivergenceSign::Mixed:
        return "Mixed";
    }
    return "?";
}

DensityField gibbs_density(const Potential& v, const Grid1D& grid)
{
    const int n = grid.n_cells();
    std::vector<double> vals(static_cast<std::size_t>(n));
    double v_min = v.value(grid.center(0));
    for (int i = 0; i < n; ++i)
        v_min = std::min(v_min, v.value(grid.center(i)));
    // shift by min V so exp never underflows at the well bottom
    for (int i = 0; i < n; ++i)
        vals[static_cast<std::size_t>(i)] = std::exp(-(v.value(grid.center(i)) - v_min));
    const double z = grid.dx() * ordered_sum(vals);
    for (double& u : vals)
        u /= z;
    return DensityField(grid, std::move(vals));
}

double force_flux_divergence(const Potential& v, const CostFunction& cost, double x)
{
    if (v.kind() == Potential::Kind::Zero)
        return 0.0;
    return cost.hess1(v.grad(x)) * v.hess(x);
}

DivergenceSign classify_sign(const Potential& v, const CostFunction& cost, const Grid1D& grid)
{
    bool nonneg = true;
    bool nonpos = true;
    for (int i = 0; i < grid.n_cells(); ++i) {
        const double d = force_flux_divergence(v, cost, grid.center(i));
        nonneg = nonneg && d >= -1e-12;
        nonpos = nonpos && d <= 1e-12;
    }
    if (nonneg)
        return DivergenceSign::NonNegative;
    if (nonpos)
        return DivergenceSign::NonPositive;
    return DivergenceSign::Mixed;
}

} // namespace fluxlim
