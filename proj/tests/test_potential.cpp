#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fluxlim/potential.hpp"
#include "oracles.hpp"

using namespace fluxlim;

namespace {

std::vector<Potential> sample_potentials()
{
    return {Potential::zero(), Potential::quadratic(1.0), Potential::quadratic(3.5), Potential::double_well(1.0),
            Potential::double_well(0.4), Potential::polynomial({0.3, -1.0, 0.5, 0.2, -0.05})};
}

std::vector<CostFunction> sample_costs()
{
    return {CostFunction::relativistic(1.0), CostFunction::relativistic(0.25), CostFunction::classical()};
}

} // namespace

TEST(Potential, ClosedForms)
{
    const Potential q = Potential::quadratic(2.0);
    EXPECT_DOUBLE_EQ(q.value(3.0), 9.0);
    EXPECT_DOUBLE_EQ(q.grad(3.0), 6.0);
    EXPECT_DOUBLE_EQ(q.hess(3.0), 2.0);
    const Potential w = Potential::double_well(1.5);
    for (double x : {-2.0, -0.3, 0.0, 1.1, 2.7}) {
        EXPECT_NEAR(w.value(x), std::pow(x * x - 2.25, 2) / 4.0, 1e-12);
        EXPECT_NEAR(w.grad(x), x * (x * x - 2.25), 1e-12);
        EXPECT_NEAR(w.hess(x), 3.0 * x * x - 2.25, 1e-12);
    }
    const Potential p = Potential::polynomial({1.0, -2.0, 0.0, 4.0});
    EXPECT_DOUBLE_EQ(p.value(2.0), 1.0 - 4.0 + 32.0);
    EXPECT_DOUBLE_EQ(p.grad(2.0), -2.0 + 48.0);
    EXPECT_DOUBLE_EQ(p.hess(2.0), 48.0);
    EXPECT_EQ(Potential::zero().value(5.0), 0.0);
    EXPECT_EQ(Potential::zero().grad(5.0), 0.0);
    EXPECT_EQ(Potential::zero().hess(5.0), 0.0);
}

TEST(Potential, ParsesSpecStrings)
{
    EXPECT_EQ(Potential::parse("zero").kind(), Potential::Kind::Zero);
    EXPECT_EQ(Potential::parse("quadratic:2").kind(), Potential::Kind::Quadratic);
    EXPECT_DOUBLE_EQ(Potential::parse("quadratic:2").value(1.0), 1.0);
    EXPECT_EQ(Potential::parse("double_well:1").kind(), Potential::Kind::DoubleWell);
    const Potential p = Potential::parse("poly:0,0,-0.5");
    EXPECT_EQ(p.kind(), Potential::Kind::Polynomial);
    EXPECT_DOUBLE_EQ(p.value(2.0), -2.0);
    EXPECT_DOUBLE_EQ(p.hess(0.3), -1.0);
}

TEST(Potential, RejectsMalformedSpecs)
{
    for (const char* bad : {"", "poly:", "poly:1,,2", "poly:1,x", "quadratic:-1", "quadratic:0", "quartic:1",
                            "poly:1,inf", "double_well:"}) {
        EXPECT_THROW(Potential::parse(bad), std::invalid_argument) << bad;
    }
}

TEST(Potential, DerivativesMatchFiniteDifferences)
{
    const double h = 1e-5;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> pos(-3.0, 3.0);
    for (const Potential& v : sample_potentials()) {
        for (int k = 0; k < 200; ++k) {
            const double x = pos(rng);
            EXPECT_NEAR((v.value(x + h) - v.value(x - h)) / (2 * h), v.grad(x), 1e-6) << v.describe();
            EXPECT_NEAR((v.grad(x + h) - v.grad(x - h)) / (2 * h), v.hess(x), 1e-6) << v.describe();
        }
    }
}

TEST(Gibbs, FlatPotentialIsUniform)
{
    const DensityField u = gibbs_density(Potential::zero(), Grid1D(0.0, 1.0, 100));
    for (double v : u.values)
        EXPECT_NEAR(v, 1.0, 1e-14);
}

TEST(Gibbs, QuadraticGivesStandardNormal)
{
    const Grid1D g(-6.0, 6.0, 400);
    const DensityField u = gibbs_density(Potential::quadratic(1.0), g);
    double peak = 0.0;
    for (double v : u.values)
        peak = std::max(peak, v);
    EXPECT_NEAR(peak, 0.39894, 1e-3);
    for (int i = 0; i < g.n_cells(); ++i) {
        const double x = g.center(i);
        EXPECT_NEAR(u[i], std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI), 1e-6);
    }
}

TEST(Gibbs, DoubleWellIsSymmetricBimodal)
{
    const Grid1D g(-3.0, 3.0, 600);
    const DensityField u = gibbs_density(Potential::double_well(1.0), g);
    for (int i = 0; i < g.n_cells(); ++i)
        EXPECT_NEAR(u[i], u[g.n_cells() - 1 - i], 1e-13);
    int arg = 0;
    for (int i = 0; i < g.n_cells() / 2; ++i) {
        if (u[i] > u[arg])
            arg = i;
    }
    EXPECT_NEAR(g.center(arg), -1.0, g.dx());
    EXPECT_LT(u[g.n_cells() / 2], u[arg]);
}

TEST(Gibbs, UnitMassForEveryPotential)
{
    for (const Potential& v : sample_potentials()) {
        for (const Grid1D& g : {Grid1D(-3.0, 3.0, 97), Grid1D(-1.0, 5.0, 400), Grid1D(0.0, 1.0, 10)})
            EXPECT_NEAR(mass(gibbs_density(v, g)), 1.0, 1e-12) << v.describe();
    }
}

TEST(Gibbs, SurvivesLargePotentials)
{
    const DensityField u = gibbs_density(Potential::quadratic(2000.0), Grid1D(-5.0, 5.0, 1000));
    EXPECT_NEAR(mass(u), 1.0, 1e-12);
    for (double v : u.values)
        EXPECT_TRUE(std::isfinite(v));
}

TEST(ForceFluxDivergence, Examples)
{
    const CostFunction c1 = CostFunction::relativistic(1.0);
    EXPECT_NEAR(force_flux_divergence(Potential::quadratic(1.0), c1, 0.0), 1.0, 1e-15);
    EXPECT_NEAR(force_flux_divergence(Potential::quadratic(1.0), c1, 1.0), 0.35355, 1e-5);
    EXPECT_NEAR(force_flux_divergence(Potential::quadratic(1.0), c1, 1.0), std::pow(2.0, -1.5), 1e-15);
    for (const CostFunction& c : sample_costs()) {
        for (double x : {-2.0, 0.0, 0.7})
            EXPECT_EQ(force_flux_divergence(Potential::zero(), c, x), 0.0);
    }
}

TEST(ForceFluxDivergence, MatchesOneDimensionalFormulaAtEveryCell)
{
    const CostFunction c1 = CostFunction::relativistic(1.0);
    const Grid1D g(-3.0, 3.0, 300);
    for (const Potential& v : sample_potentials()) {
        for (int i = 0; i < g.n_cells(); ++i) {
            const double x = g.center(i);
            const double expected = v.hess(x) / std::pow(1.0 + v.grad(x) * v.grad(x), 1.5);
            EXPECT_NEAR(force_flux_divergence(v, c1, x), expected, 1e-12) << v.describe() << " x=" << x;
        }
    }
}

TEST(ForceFluxDivergence, ClassicalCostGivesLaplacianOfV)
{
    for (const Potential& v : sample_potentials()) {
        for (double x : {-1.3, 0.2, 2.4})
            EXPECT_DOUBLE_EQ(force_flux_divergence(v, CostFunction::classical(), x), v.hess(x));
    }
}

TEST(ClassifySign, Examples)
{
    const CostFunction c1 = CostFunction::relativistic(1.0);
    const Grid1D g(-3.0, 3.0, 300);
    EXPECT_EQ(classify_sign(Potential::quadratic(1.0), c1, g), DivergenceSign::NonNegative);
    EXPECT_EQ(classify_sign(Potential::zero(), c1, g), DivergenceSign::NonNegative);
    EXPECT_EQ(classify_sign(Potential::double_well(1.0), c1, g), DivergenceSign::Mixed);
    EXPECT_EQ(classify_sign(Potential::polynomial({0.0, 0.0, -0.5}), c1, g), DivergenceSign::NonPositive);
    // concave V restricted to a region where it is convex-free
    EXPECT_EQ(classify_sign(Potential::double_well(2.0), c1, Grid1D(-1.0, 1.0, 100)), DivergenceSign::NonPositive);
    EXPECT_STREQ(to_string(DivergenceSign::Mixed), "Mixed");
}

TEST(ClassifySign, ConvexQuadraticIsNonNegativeForEveryCost)
{
    const Grid1D g(-5.0, 5.0, 200);
    for (double kappa : {1e-3, 0.1, 1.0, 10.0, 1e3}) {
        for (const CostFunction& c : sample_costs())
            EXPECT_EQ(classify_sign(Potential::quadratic(kappa), c, g), DivergenceSign::NonNegative) << kappa;
    }
}

TEST(Potential, ConfinementHeuristic)
{
    const Grid1D g(-3.0, 3.0, 60);
    EXPECT_TRUE(Potential::quadratic(1.0).confining_on(g));
    EXPECT_TRUE(Potential::double_well(1.0).confining_on(g));
    EXPECT_FALSE(Potential::zero().confining_on(g));
    EXPECT_FALSE(Potential::polynomial({0.0, 1.0}).confining_on(g));
}
