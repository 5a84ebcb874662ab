#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fluxlim/operators.hpp"
#include "oracles.hpp"

using namespace fluxlim;

namespace {

OperatorContext make_ctx(CostFunction cost, Potential v, Grid1D g,
                         InterfaceDensity density = InterfaceDensity::Upwind,
                         FluxMode mode = FluxMode::SeparateArgument)
{
    OperatorContext ctx{std::move(cost), std::move(v), g};
    ctx.interface_density = density;
    ctx.flux_mode = mode;
    return ctx;
}

DensityField random_positive(const Grid1D& g, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(0.1, 2.0);
    DensityField u(g);
    for (double& v : u.values)
        v = d(rng);
    return u;
}

DensityField bump(const Grid1D& g)
{
    DensityField u(g);
    for (int i = 0; i < g.n_cells(); ++i)
        u[i] = 1.0 + 0.5 * std::exp(-g.center(i) * g.center(i));
    return u;
}

double max_abs(const DensityField& f, int skip = 0)
{
    double m = 0.0;
    for (int i = skip; i < f.size() - skip; ++i)
        m = std::max(m, std::abs(f[i]));
    return m;
}

const InterfaceDensity kDensities[] = {InterfaceDensity::Upwind, InterfaceDensity::Centered,
                                       InterfaceDensity::Limited};
const FluxMode kModes[] = {FluxMode::SeparateArgument, FluxMode::CombinedArgument};

} // namespace

TEST(ApplyL, ConstantFieldWithoutForceIsStationary)
{
    const Grid1D g(-1.0, 2.0, 50);
    for (const CostFunction& c : {CostFunction::relativistic(1.0), CostFunction::classical()}) {
        for (InterfaceDensity d : kDensities) {
            for (FluxMode m : kModes)
                EXPECT_EQ(max_abs(apply_L(make_ctx(c, Potential::zero(), g, d, m), DensityField(g, 0.7))), 0.0);
        }
    }
}

TEST(ApplyL, ClassicalExponentialProfileIsItsOwnSecondDerivative)
{
    double prev = 0.0;
    for (int n : {100, 200, 400}) {
        const Grid1D g(0.0, 1.0, n);
        DensityField u(g);
        for (int i = 0; i < n; ++i)
            u[i] = std::exp(-g.center(i));
        const DensityField lu =
            apply_L(make_ctx(CostFunction::classical(), Potential::zero(), g, InterfaceDensity::Centered), u);
        double err = 0.0;
        for (int i = 1; i + 1 < n; ++i)
            err = std::max(err, std::abs(lu[i] - std::exp(-g.center(i))));
        EXPECT_LE(err, 2.0 * g.dx() * g.dx());
        if (prev > 0.0)
            EXPECT_GE(prev / err, 3.5);
        prev = err;
    }
}

TEST(ApplyL, UpwindExponentialProfileIsFirstOrder)
{
    const Grid1D g(0.0, 1.0, 200);
    DensityField u(g);
    for (int i = 0; i < g.n_cells(); ++i)
        u[i] = std::exp(-g.center(i));
    const DensityField lu = apply_L(make_ctx(CostFunction::classical(), Potential::zero(), g), u);
    for (int i = 1; i + 1 < g.n_cells(); ++i)
        EXPECT_NEAR(lu[i], std::exp(-g.center(i)), g.dx());
}

TEST(ApplyL, DiscreteGibbsDensityHasZeroFlux)
{
    for (const CostFunction& c : {CostFunction::relativistic(1.0), CostFunction::relativistic(0.3),
                                  CostFunction::classical()}) {
        for (const Potential& v : {Potential::quadratic(1.0), Potential::double_well(1.0)}) {
            const Grid1D g(-4.0, 4.0, 400);
            for (InterfaceDensity d : kDensities) {
                for (FluxMode m : kModes) {
                    const auto ctx = make_ctx(c, v, g, d, m);
                    EXPECT_LE(max_abs(apply_L(ctx, gibbs_density(v, g))), 1e-12) << v.describe();
                }
            }
        }
    }
}

TEST(ApplyL, CellAveragedGibbsResidualDecaysAtSecondOrder)
{
    const auto ctx_for = [](int n) {
        return make_ctx(CostFunction::relativistic(1.0), Potential::quadratic(1.0), Grid1D(-6.0, 6.0, n));
    };
    const auto residual = [&](int n) {
        const auto ctx = ctx_for(n);
        return max_abs(apply_L(ctx, DensityField(ctx.grid, oracle::gaussian_cell_averages(-6.0, 6.0, n))));
    };
    const double r400 = residual(400);
    const double r800 = residual(800);
    EXPECT_LE(r400, 1e-3);
    EXPECT_LE(r800, 2.5e-4);
    EXPECT_GE(r400 / r800, 3.0);
}

TEST(ApplyL, ConservesMassUnderNoFlux)
{
    const Grid1D g(-3.0, 3.0, 257);
    for (const CostFunction& c : {CostFunction::relativistic(1.0), CostFunction::relativistic(0.2),
                                  CostFunction::classical()}) {
        for (const Potential& v : {Potential::zero(), Potential::quadratic(2.0), Potential::double_well(1.0)}) {
            for (InterfaceDensity d : kDensities) {
                for (FluxMode m : kModes) {
                    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
                        const DensityField lu = apply_L(make_ctx(c, v, g, d, m), random_positive(g, seed));
                        double total = 0.0;
                        double scale = 0.0;
                        for (double r : lu.values) {
                            total += r * g.dx();
                            scale += std::abs(r) * g.dx();
                        }
                        ASSERT_LE(std::abs(total), 1e-13 * std::max(1.0, scale));
                    }
                }
            }
        }
    }
}

TEST(ApplyL, TranslationEquivariantWithoutForce)
{
    const Grid1D g(-4.0, 4.0, 200);
    const int shift = 17;
    DensityField u(g);
    DensityField shifted(g);
    for (int i = 0; i < g.n_cells(); ++i) {
        u[i] = 0.2 + std::exp(-std::pow(g.center(i) + 0.5, 2));
        shifted[i] = 0.2 + std::exp(-std::pow(g.center(i) - shift * g.dx() + 0.5, 2));
    }
    for (InterfaceDensity d : kDensities) {
        const auto ctx = make_ctx(CostFunction::relativistic(1.0), Potential::zero(), g, d);
        const DensityField a = apply_L(ctx, u);
        const DensityField b = apply_L(ctx, shifted);
        for (int i = 3; i + shift + 3 < g.n_cells(); ++i)
            ASSERT_NEAR(b[i + shift], a[i], 1e-10);
    }
}

TEST(ApplyL, ClassicalCostReducesToLinearDriftDiffusion)
{
    const Grid1D g(-2.0, 3.0, 120);
    const Potential v = Potential::polynomial({0.0, 0.4, 0.8, -0.1});
    const DensityField u = random_positive(g, 11);
    const double dx = g.dx();
    for (FluxMode m : kModes) {
        const DensityField lu = apply_L(make_ctx(CostFunction::classical(), v, g, InterfaceDensity::Upwind, m), u);
        for (int i = 1; i + 1 < g.n_cells(); ++i) {
            auto flux = [&](int k) {
                const double vel = -((v.value(g.center(k + 1)) - v.value(g.center(k))) / dx +
                                     (std::log(u[k + 1]) - std::log(u[k])) / dx);
                return (vel > 0.0 ? u[k] : u[k + 1]) * vel;
            };
            ASSERT_NEAR(lu[i], -(flux(i) - flux(i - 1)) / dx, 1e-12 * (1.0 + std::abs(lu[i])));
        }
    }
}

TEST(ApplyL, CombinedModeCoincidesWithSeparateForClassicalCost)
{
    const Grid1D g(-2.0, 2.0, 150);
    const DensityField u = random_positive(g, 5);
    for (InterfaceDensity d : kDensities) {
        const auto sep = apply_L(make_ctx(CostFunction::classical(), Potential::double_well(0.8), g, d,
                                          FluxMode::SeparateArgument), u);
        const auto com = apply_L(make_ctx(CostFunction::classical(), Potential::double_well(0.8), g, d,
                                          FluxMode::CombinedArgument), u);
        for (int i = 0; i < g.n_cells(); ++i)
            ASSERT_NEAR(sep[i], com[i], 1e-12 * (1.0 + std::abs(sep[i])));
    }
}

TEST(ApplyL, CombinedModeDiffersForRelativisticCost)
{
    const Grid1D g(-2.0, 2.0, 150);
    const DensityField u = random_positive(g, 5);
    const auto sep = apply_L(make_ctx(CostFunction::relativistic(1.0), Potential::quadratic(1.0), g), u);
    const auto com = apply_L(make_ctx(CostFunction::relativistic(1.0), Potential::quadratic(1.0), g,
                                      InterfaceDensity::Upwind, FluxMode::CombinedArgument), u);
    double diff = 0.0;
    for (int i = 0; i < g.n_cells(); ++i)
        diff = std::max(diff, std::abs(sep[i] - com[i]));
    EXPECT_GT(diff, 1e-3);
}

TEST(ApplyL, InterfaceVelocityIsBoundedByTwiceTheSpeed)
{
    const Grid1D g(-4.0, 4.0, 100);
    DensityField u(g, 1e-12);
    u[50] = 1.0;
    for (const auto& f : interface_fluxes(make_ctx(CostFunction::relativistic(0.5), Potential::quadratic(50.0), g), u))
        EXPECT_LE(std::abs(f.velocity), 1.0);
}

TEST(ApplyL, RejectsNonFiniteField)
{
    const Grid1D g(0.0, 1.0, 10);
    DensityField u(g, 1.0);
    u[4] = std::nan("");
    const auto ctx = make_ctx(CostFunction::relativistic(1.0), Potential::zero(), g);
    try {
        apply_L(ctx, u);
        FAIL() << "expected an error";
    } catch (const std::domain_error& e) {
        EXPECT_STREQ(e.what(), "non-finite field");
    }
    u[4] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(apply_L(ctx, u), std::domain_error);
    EXPECT_THROW(apply_L(ctx, DensityField(Grid1D(0.0, 1.0, 11), 1.0)), std::invalid_argument);
}

TEST(ApplyL, DirichletBoundaryMatchingTheFieldIsStationary)
{
    const Grid1D g(0.0, 1.0, 40);
    auto ctx = make_ctx(CostFunction::relativistic(1.0), Potential::zero(), g);
    ctx.boundary = Boundary::dirichlet(0.5, 0.5);
    EXPECT_EQ(max_abs(apply_L(ctx, DensityField(g, 0.5))), 0.0);
}

TEST(ApplyL, DirichletBoundaryDrivesMassThroughTheEnds)
{
    const Grid1D g(0.0, 1.0, 40);
    auto ctx = make_ctx(CostFunction::relativistic(1.0), Potential::zero(), g);
    ctx.boundary = Boundary::dirichlet(2.0, 1.0);
    const DensityField u(g, 1.0);
    const DensityField lu = apply_L(ctx, u);
    EXPECT_GT(lu[0], 0.0);
    EXPECT_EQ(lu[g.n_cells() - 1], 0.0);
    const auto f = interface_fluxes(ctx, u);
    double total = 0.0;
    for (double r : lu.values)
        total += r * g.dx();
    EXPECT_NEAR(total, f.front().flux - f.back().flux, 1e-14);
}

TEST(ApplyQ, ConstantLogDensityWithoutForce)
{
    const Grid1D g(-1.0, 1.0, 30);
    const auto q = apply_Q(make_ctx(CostFunction::relativistic(1.0), Potential::zero(), g),
                           std::vector<double>(30, -0.4));
    for (double v : q)
        EXPECT_EQ(v, 0.0);
}

TEST(ApplyQ, GibbsLogDensityIsStationary)
{
    const Grid1D g(-6.0, 6.0, 400);
    const Potential v = Potential::quadratic(1.0);
    std::vector<double> w(400);
    for (int i = 0; i < 400; ++i)
        w[static_cast<std::size_t>(i)] = -v.value(g.center(i));
    const auto q = apply_Q(make_ctx(CostFunction::relativistic(1.0), v, g), w);
    for (double x : q)
        EXPECT_NEAR(x, 0.0, 1e-12);
}

TEST(ApplyQ, LinearLogDensity)
{
    const Grid1D g(0.0, 1.0, 50);
    std::vector<double> w(50);
    for (int i = 0; i < 50; ++i)
        w[static_cast<std::size_t>(i)] = g.center(i);
    const auto q = apply_Q(make_ctx(CostFunction::relativistic(1.0), Potential::zero(), g), w);
    EXPECT_EQ(q.front(), 0.0);
    EXPECT_EQ(q.back(), 0.0);
    for (std::size_t k = 1; k + 1 < q.size(); ++k)
        EXPECT_NEAR(q[k], 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(ApplyQ, RejectsBadInput)
{
    const Grid1D g(0.0, 1.0, 10);
    const auto ctx = make_ctx(CostFunction::relativistic(1.0), Potential::zero(), g);
    EXPECT_THROW(apply_Q(ctx, std::vector<double>(9, 0.0)), std::invalid_argument);
    std::vector<double> w(10, 0.0);
    w[3] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(apply_Q(ctx, w), std::domain_error);
}

TEST(LqIdentity, SmoothBumpConvergesAtSecondOrder)
{
    const auto mismatch = [](int n) {
        const Grid1D g(-4.0, 4.0, n);
        return check_LQ_identity(make_ctx(CostFunction::relativistic(1.0), Potential::quadratic(1.0), g,
                                          InterfaceDensity::Centered),
                                 bump(g));
    };
    const double m400 = mismatch(400);
    const double m800 = mismatch(800);
    EXPECT_LE(m400, 1e-3);
    EXPECT_GE(m400 / m800, 3.0);
}

TEST(LqIdentity, ConstantFieldMatchesExactly)
{
    const Grid1D g(-1.0, 1.0, 64);
    EXPECT_EQ(check_LQ_identity(make_ctx(CostFunction::relativistic(1.0), Potential::zero(), g), DensityField(g, 3.0)),
              0.0);
}

TEST(LqIdentity, GibbsDensityAnnihilatesBothSides)
{
    const Grid1D g(-5.0, 5.0, 300);
    for (const Potential& v : {Potential::quadratic(1.0), Potential::quadratic(4.0)})
        EXPECT_LE(check_LQ_identity(make_ctx(CostFunction::relativistic(1.0), v, g), gibbs_density(v, g)), 1e-6);
}

TEST(LqIdentity, RequiresPositiveDensity)
{
    const Grid1D g(-1.0, 1.0, 8);
    DensityField u(g, 1.0);
    u[2] = 0.0;
    EXPECT_THROW(check_LQ_identity(make_ctx(CostFunction::relativistic(1.0), Potential::zero(), g), u),
                 std::invalid_argument);
}

TEST(Ellipticity, InterfaceCoefficientIsPositive)
{
    const Grid1D g(-3.0, 3.0, 100);
    const DensityField u = random_positive(g, 9);
    for (const CostFunction& c : {CostFunction::relativistic(1.0), CostFunction::classical()}) {
        for (const auto& f : interface_fluxes(make_ctx(c, Potential::double_well(1.0), g), u)) {
            EXPECT_GT(c.hess1(f.log_gradient), 0.0);
            EXPECT_GT(c.hess1(f.force_gradient + f.log_gradient), 0.0);
        }
    }
}
