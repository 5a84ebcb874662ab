#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "fluxlim/cost.hpp"
#include "fluxlim/diagnostics.hpp"
#include "oracles.hpp"

using namespace fluxlim;

namespace {

constexpr std::uint64_t kSeed = 20240611;

Eigen::VectorXd vec(std::initializer_list<double> v)
{
    Eigen::VectorXd z(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (double x : v)
        z[k++] = x;
    return z;
}

RadialProfile relativistic_profile(double c, int n)
{
    return sample_profile([c](double r) { return oracle::rel_cost(std::min(r, c), c); }, c, n);
}

// a non-relativistic bounded cost: -c^2/2 log(1 - r^2/c^2), sampled up to 0.999 c
RadialProfile log_barrier_profile(double c, int n)
{
    return sample_profile([c](double r) { return -0.5 * c * c * std::log1p(-(r * r) / (c * c)); }, 0.999 * c, n);
}

struct Kind {
    const char* name;
    CostFunction cost;
};

std::vector<Kind> all_kinds()
{
    return {
        {"relativistic c=0.5", CostFunction::relativistic(0.5)},
        {"relativistic c=1", CostFunction::relativistic(1.0)},
        {"relativistic c=3", CostFunction::relativistic(3.0)},
        {"classical", CostFunction::classical()},
        {"tabulated relativistic c=2", CostFunction::tabulated(relativistic_profile(2.0, 10001))},
        {"tabulated log barrier c=1.5", CostFunction::tabulated(log_barrier_profile(1.5, 10001))},
    };
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, int d, double radius)
{
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd z(d);
    for (int k = 0; k < d; ++k)
        z[k] = normal(rng);
    return z.normalized() * radius * std::pow(unit(rng), 1.0 / d);
}

} // namespace

TEST(RelativisticCost, ClosedFormValues)
{
    const CostFunction c1 = CostFunction::relativistic(1.0);
    EXPECT_EQ(c1.dual_value(vec({0.0})), 0.0);
    EXPECT_NEAR(c1.dual_value(vec({std::sqrt(3.0)})), 1.0, 1e-15);
    EXPECT_NEAR(c1.dual_grad(vec({1.0}))[0], 0.7071067811865475, 1e-15);
    EXPECT_EQ(CostFunction::classical().dual_value(vec({2.0})), 2.0);
}

TEST(RelativisticCost, SpeedSaturates)
{
    const CostFunction c2 = CostFunction::relativistic(2.0);
    const double g = c2.dual_grad(vec({1e6}))[0];
    EXPECT_LT(g, 2.0);
    EXPECT_LT(2.0 - g, 1e-5);
}

TEST(RelativisticCost, HessianAtOriginAndOnAxis)
{
    const CostFunction c1 = CostFunction::relativistic(1.0);
    EXPECT_TRUE(c1.dual_hess(vec({0.0, 0.0})).isApprox(Eigen::MatrixXd::Identity(2, 2), 1e-15));
    const Eigen::MatrixXd h = c1.dual_hess(vec({1.0, 0.0}));
    EXPECT_NEAR(h(0, 0), std::pow(2.0, -1.5), 1e-15);
    EXPECT_NEAR(h(1, 1), std::pow(2.0, -0.5), 1e-15);
    EXPECT_NEAR(h(0, 1), 0.0, 1e-15);
    EXPECT_NEAR(h(0, 0), 0.35355, 1e-5);
    EXPECT_NEAR(h(1, 1), 0.70711, 1e-5);
}

TEST(RelativisticCost, HessianEigenvaluesForUnitSpeed)
{
    const CostFunction c1 = CostFunction::relativistic(1.0);
    std::mt19937_64 rng(kSeed);
    for (int d = 1; d <= 3; ++d) {
        for (int k = 0; k < 50; ++k) {
            const Eigen::VectorXd z = random_vector(rng, d, 10.0);
            const double q = 1.0 + z.squaredNorm();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c1.dual_hess(z));
            const auto ev = es.eigenvalues();
            EXPECT_NEAR(ev[0], std::pow(q, -1.5), 1e-14);
            for (int j = 1; j < d; ++j)
                EXPECT_NEAR(ev[j], std::pow(q, -0.5), 1e-14);
        }
    }
}

TEST(RelativisticCost, MatchesIndependentFormulas)
{
    std::mt19937_64 rng(kSeed);
    std::uniform_real_distribution<double> s(-10.0, 10.0);
    for (double c : {0.3, 1.0, 2.5}) {
        const CostFunction cost = CostFunction::relativistic(c);
        for (int k = 0; k < 200; ++k) {
            const double z = s(rng);
            EXPECT_NEAR(cost.dual_radial(std::abs(z)), oracle::rel_conjugate(z, c), 1e-13 * (1.0 + std::abs(z)));
            EXPECT_NEAR(cost.grad1(z), oracle::rel_speed(z, c), 1e-14);
            EXPECT_NEAR(cost.hess1(z), oracle::rel_curvature(z, c), 1e-14);
            const double r = c * std::abs(z) / 10.0;
            EXPECT_NEAR(cost.primal(r), oracle::rel_cost(r, c), 1e-13);
        }
        EXPECT_EQ(cost.primal(c * (1.0 + 1e-12)), std::numeric_limits<double>::infinity());
        EXPECT_NEAR(cost.primal(c), c * c, 1e-14);
    }
}

TEST(CostFunction, FenchelYoungEquality)
{
    std::mt19937_64 rng(kSeed);
    std::uniform_real_distribution<double> s(0.0, 10.0);
    for (const Kind& k : all_kinds()) {
        for (int j = 0; j < 100; ++j) {
            const double z = s(rng);
            const double g = k.cost.grad1(z);
            EXPECT_NEAR(k.cost.primal(g) + k.cost.dual_radial(z), z * g, 1e-6 * (1.0 + z * g)) << k.name;
        }
    }
}

TEST(SpeedBound, PerKind)
{
    EXPECT_EQ(CostFunction::relativistic(1.0).speed_bound(), 1.0);
    EXPECT_EQ(CostFunction::relativistic(2.5).speed_bound(), 2.5);
    EXPECT_EQ(CostFunction::classical().speed_bound(), std::numeric_limits<double>::infinity());
    EXPECT_FALSE(CostFunction::classical().bounded());
    EXPECT_DOUBLE_EQ(CostFunction::tabulated(relativistic_profile(2.0, 2001)).speed_bound(), 2.0);
    EXPECT_THROW(CostFunction::relativistic(0.0), std::invalid_argument);
    EXPECT_THROW(CostFunction::relativistic(-1.0), std::invalid_argument);
}

TEST(NumericalConjugate, RelativisticProfile)
{
    const RadialProfile p = relativistic_profile(1.0, 10000);
    EXPECT_NEAR(numerical_conjugate(p, 1.0), std::sqrt(2.0) - 1.0, 1e-6);
    EXPECT_EQ(numerical_conjugate(p, 0.0), 0.0);
    EXPECT_NEAR(numerical_conjugate(p, 1.0), oracle::legendre_sup([](double r) { return oracle::rel_cost(r, 1.0); },
                                                                  1.0, 1.0),
                1e-6);
}

TEST(NumericalConjugate, QuadraticProfileIsSelfDual)
{
    const RadialProfile p = sample_profile([](double r) { return 0.5 * r * r; }, 10.0, 10000);
    EXPECT_NEAR(numerical_conjugate(p, 1.0), 0.5, 1e-6);
    EXPECT_NEAR(numerical_conjugate(p, 3.7), 0.5 * 3.7 * 3.7, 1e-6);
}

TEST(NumericalConjugate, RejectsInvalidProfiles)
{
    try {
        numerical_conjugate(sample_profile([](double r) { return r * (1.0 - r); }, 1.0, 101), 1.0);
        FAIL() << "expected an error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("nondecreasing"), std::string::npos);
    }
    EXPECT_THROW(numerical_conjugate(sample_profile([](double r) { return 1.0 + r; }, 1.0, 11), 1.0),
                 std::invalid_argument);
    RadialProfile kinked = sample_profile([](double r) { return r < 0.5 ? r * r : 0.25; }, 1.0, 101);
    try {
        numerical_conjugate(kinked, 1.0);
        FAIL() << "expected an error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("profile not convex"), std::string::npos);
    }
}

TEST(TabulatedCost, ReproducesRelativisticClosedForm)
{
    const CostFunction tab = CostFunction::tabulated(relativistic_profile(2.0, 10001));
    for (double s : {0.0, 1e-3, 0.1, 0.7, 1.9, 5.0}) {
        EXPECT_NEAR(tab.dual_radial(s), oracle::rel_conjugate(s, 2.0), 1e-6 * (1.0 + s)) << s;
        EXPECT_NEAR(tab.dual_radial_d1(s), oracle::rel_speed(s, 2.0), 1e-5) << s;
        EXPECT_NEAR(tab.dual_radial_d2(s), oracle::rel_curvature(s, 2.0), 1e-4) << s;
    }
}

TEST(TabulatedCost, TailBeyondSampledSlopesStaysClose)
{
    const CostFunction tab = CostFunction::tabulated(relativistic_profile(2.0, 10001));
    for (double s : {20.0, 200.0, 2e4}) {
        EXPECT_NEAR(tab.dual_radial(s) / oracle::rel_conjugate(s, 2.0), 1.0, 2e-5) << s;
        EXPECT_NEAR(tab.dual_radial_d1(s), oracle::rel_speed(s, 2.0), 5e-5) << s;
        EXPECT_LT(tab.dual_radial_d1(s), 2.0);
        EXPECT_GT(tab.dual_radial_d2(s), 0.0);
    }
}

TEST(TabulatedCost, RejectsAffineProfiles)
{
    EXPECT_THROW(CostFunction::tabulated(sample_profile([](double r) { return r; }, 1.0, 200)),
                 std::invalid_argument);
    // quadratic on a finite radius: the conjugate gradient never approaches the radius
    EXPECT_THROW(CostFunction::tabulated(sample_profile([](double r) { return 0.5 * r * r; }, 1.0, 200)),
                 std::invalid_argument);
}

TEST(TabulatedCost, LoadsProfileCsv)
{
    const auto path = std::filesystem::temp_directory_path() / "fluxlim_profile.csv";
    {
        std::ofstream f(path);
        f.precision(17);
        f << "r,phi\n";
        const RadialProfile p = relativistic_profile(1.0, 4001);
        for (std::size_t k = 0; k < p.r.size(); ++k)
            f << p.r[k] << ',' << p.phi[k] << '\n';
    }
    const RadialProfile loaded = load_profile_csv(path.string());
    EXPECT_EQ(loaded.r.size(), 4001u);
    EXPECT_NEAR(CostFunction::tabulated(loaded).dual_radial(1.0), std::sqrt(2.0) - 1.0, 1e-6);

    std::ofstream(path) << "radius,value\n0,0\n1,1\n";
    EXPECT_ANY_THROW(load_profile_csv(path.string()));
    std::filesystem::remove(path);
}

// Property suites over seeded random samples, d = 1, 2, 3, |z| <= 10.

TEST(CostProperties, OddGradient)
{
    std::mt19937_64 rng(kSeed);
    for (const Kind& k : all_kinds()) {
        for (int d = 1; d <= 3; ++d) {
            EXPECT_EQ(k.cost.dual_grad(Eigen::VectorXd::Zero(d)).norm(), 0.0);
            EXPECT_EQ(k.cost.dual_value(Eigen::VectorXd::Zero(d)), 0.0);
            for (int s = 0; s < 1000; ++s) {
                const Eigen::VectorXd z = random_vector(rng, d, 10.0);
                ASSERT_LE((k.cost.dual_grad(-z) + k.cost.dual_grad(z)).norm(), 1e-12) << k.name;
            }
        }
    }
}

TEST(CostProperties, StrictlyMonotoneGradient)
{
    std::mt19937_64 rng(kSeed + 1);
    for (const Kind& k : all_kinds()) {
        for (int d = 1; d <= 3; ++d) {
            for (int s = 0; s < 1000; ++s) {
                const Eigen::VectorXd a = random_vector(rng, d, 10.0);
                const Eigen::VectorXd b = random_vector(rng, d, 10.0);
                ASSERT_GT((k.cost.dual_grad(a) - k.cost.dual_grad(b)).dot(a - b), 0.0) << k.name;
            }
        }
    }
}

TEST(CostProperties, SymmetricPositiveDefiniteHessian)
{
    std::mt19937_64 rng(kSeed + 2);
    for (const Kind& k : all_kinds()) {
        for (int d = 1; d <= 3; ++d) {
            for (int s = 0; s < 1000; ++s) {
                const Eigen::MatrixXd h = k.cost.dual_hess(random_vector(rng, d, 10.0));
                ASSERT_LE((h - h.transpose()).norm(), 1e-15);
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
                ASSERT_GT(es.eigenvalues().minCoeff(), 0.0) << k.name;
            }
        }
    }
}

TEST(CostProperties, FiniteDifferenceConsistency)
{
    std::mt19937_64 rng(kSeed + 3);
    const double h = 1e-4;
    for (const Kind& k : all_kinds()) {
        double worst_g = 0.0;
        double worst_h = 0.0;
        for (int d = 1; d <= 3; ++d) {
            for (int s = 0; s < 1000; ++s) {
                const Eigen::VectorXd z = random_vector(rng, d, 10.0);
                const Eigen::VectorXd g = k.cost.dual_grad(z);
                const Eigen::MatrixXd hm = k.cost.dual_hess(z);
                for (int j = 0; j < d; ++j) {
                    Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
                    e[j] = h;
                    const double fd = (k.cost.dual_value(z + e) - k.cost.dual_value(z - e)) / (2 * h);
                    worst_g = std::max(worst_g, std::abs(fd - g[j]));
                    const Eigen::VectorXd col = (k.cost.dual_grad(z + e) - k.cost.dual_grad(z - e)) / (2 * h);
                    worst_h = std::max(worst_h, (col - hm.col(j)).cwiseAbs().maxCoeff());
                }
            }
        }
        EXPECT_LE(worst_g, 1e-6) << k.name;
        EXPECT_LE(worst_h, 1e-6) << k.name;
    }
}

TEST(CostProperties, SpeedSaturationForBoundedKinds)
{
    std::mt19937_64 rng(kSeed + 4);
    std::uniform_real_distribution<double> log_mag(-3.0, 300.0);
    for (const Kind& k : all_kinds()) {
        if (!k.cost.bounded())
            continue;
        const double bound = k.cost.speed_bound();
        for (int d = 1; d <= 3; ++d) {
            for (int s = 0; s < 1000; ++s) {
                const Eigen::VectorXd z = random_vector(rng, d, 1.0).normalized() * std::pow(10.0, log_mag(rng));
                ASSERT_LE(k.cost.dual_grad(z).norm(), bound * (1.0 - 1e-15)) << k.name;
            }
        }
        // approaches the bound
        EXPECT_GT(k.cost.grad1(1e8), bound * (1.0 - 1e-6)) << k.name;
    }
}

TEST(CostProperties, ClassicalLimitOfRelativisticGradient)
{
    std::mt19937_64 rng(kSeed + 5);
    const double c = 100.0;
    const CostFunction rel = CostFunction::relativistic(c);
    const CostFunction cls = CostFunction::classical();
    for (int d = 1; d <= 3; ++d) {
        for (int s = 0; s < 1000; ++s) {
            const Eigen::VectorXd z = random_vector(rng, d, 5.0);
            const double r = z.norm();
            ASSERT_LE((rel.dual_grad(z) - cls.dual_grad(z)).norm(), r * r * r / (c * c) + 1e-15);
        }
    }
}

TEST(CostProperties, NumericalLegendreMatchesClosedForm)
{
    std::mt19937_64 rng(kSeed + 6);
    std::uniform_real_distribution<double> s(0.0, 10.0);
    for (double c : {0.5, 1.0, 2.0}) {
        const RadialProfile p = relativistic_profile(c, 10000);
        for (int k = 0; k < 1000; ++k) {
            const double z = s(rng);
            ASSERT_NEAR(numerical_conjugate(p, z), oracle::rel_conjugate(z, c), 1e-6) << "c=" << c << " z=" << z;
        }
    }
}

TEST(CostProperties, DiagnosticSuitePassesForEveryKind)
{
    for (const Kind& k : all_kinds()) {
        const PrincipleReport r = check_cost_properties(k.cost, kSeed, 1000);
        EXPECT_EQ(r.verdict, Verdict::Pass) << k.name << " measured " << r.measured;
    }
}
