#include "fluxlim/cost.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fluxlim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Profile curvature from the parabola through samples k-1, k, k+1.
double local_curvature(const RadialProfile& p, std::size_t k)
{
    const double h1 = p.r[k] - p.r[k - 1];
    const double h2 = p.r[k + 1] - p.r[k];
    const double d1 = (p.phi[k] - p.phi[k - 1]) / h1;
    const double d2 = (p.phi[k + 1] - p.phi[k]) / h2;
    return 2.0 * (d2 - d1) / (h1 + h2);
}

} // namespace

RadialProfile load_profile_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open profile " + path);
    std::string line;
    std::getline(in, line);
    if (line.rfind("r,phi", 0) != 0)
        throw std::runtime_error(path + ": expected header `r,phi`");
    RadialProfile p;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::istringstream row(line);
        double r = 0.0;
        double v = 0.0;
        char comma = 0;
        if (!(row >> r >> comma >> v) || comma != ',')
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed row");
        p.r.push_back(r);
        p.phi.push_back(v);
    }
    validate_profile(p);
    return p;
}

void validate_profile(const RadialProfile& p)
{
    const std::size_t n = p.r.size();
    if (n < 3 || p.phi.size() != n)
        throw std::invalid_argument("profile needs at least three (r, phi) samples");
    if (p.r[0] != 0.0)
        throw std::invalid_argument("profile must start at r = 0");
    if (std::abs(p.phi[0]) > 1e-12)
        throw std::invalid_argument("profile must satisfy phi(0) = 0");
    for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(p.r[k]) || !std::isfinite(p.phi[k]))
            throw std::invalid_argument("profile samples must be finite");
        if (k > 0 && !(p.r[k] > p.r[k - 1]))
            throw std::invalid_argument("profile radii must be strictly increasing");
        if (k > 0 && p.phi[k] < p.phi[k - 1] - 1e-12)
            throw std::invalid_argument("profile must be nondecreasing");
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double h1 = p.r[k] - p.r[k - 1];
        const double h2 = p.r[k + 1] - p.r[k];
        const double second = local_curvature(p, k) * 0.5 * h1 * h2;
        if (second < -1e-10)
            throw std::invalid_argument("profile not convex");
    }
}

ConjugateSample conjugate_sample(const RadialProfile& p, double s)
{
    if (s < 0.0)
        throw std::invalid_argument("dual radius must be nonnegative");
    const std::size_t n = p.r.size();
    std::size_t k = 0;
    double best = s * p.r[0] - p.phi[0];
    for (std::size_t i = 1; i < n; ++i) {
        const double g = s * p.r[i] - p.phi[i];
        if (g > best) {
            best = g;
            k = i;
        }
    }

    if (k == 0) {
        // even extension about r = 0: c~(r) ~ A r^2 near the origin
        const double a = p.phi[1] / (p.r[1] * p.r[1]);
        if (!(a > 0.0))
            return {0.0, 0.0, 0.0};
        return {s * s / (4.0 * a), s / (2.0 * a), 2.0 * a};
    }
    if (k == n - 1)
        return {best, p.r[k], kInf};

    const double h1 = p.r[k] - p.r[k - 1];
    const double h2 = p.r[k + 1] - p.r[k];
    const double g0 = s * p.r[k - 1] - p.phi[k - 1];
    const double g2 = s * p.r[k + 1] - p.phi[k + 1];
    const double d1 = (best - g0) / h1;
    const double d2 = (g2 - best) / h2;
    const double a = (d2 - d1) / (h1 + h2);
    if (!(a < 0.0))
        return {best, p.r[k], 0.0};

    double rstar = 0.5 * (p.r[k - 1] + p.r[k]) - d1 / (2.0 * a);
    rstar = std::clamp(rstar, p.r[k - 1], p.r[k + 1]);
    const double value = g0 + d1 * (rstar - p.r[k - 1]) + a * (rstar - p.r[k - 1]) * (rstar - p.r[k]);

    // curvature at the refined maximizer, interpolated between sample-centred estimates
    double curv = local_curvature(p, k);
    const std::size_t other = rstar >= p.r[k] ? k + 1 : k - 1;
    if (other >= 1 && other + 1 < n) {
        const double t = (rstar - p.r[k]) / (p.r[other] - p.r[k]);
        curv = (1.0 - t) * curv + t * local_curvature(p, other);
    }
    return {std::max(value, best), rstar, curv};
}

double numerical_conjugate(const RadialProfile& profile, double r_dual)
{
    validate_profile(profile);
    if (r_dual == 0.0)
        return 0.0;
    return std::max(0.0, conjugate_sample(profile, r_dual).value);
}

namespace detail {

// Quintic Hermite interpolant of the conjugate on {0} U geometric nodes up to s_hi,
// continued by a saturating power-law tail f'(s) = c - B s^{-p}.
struct ConjugateTable {
    double radius = 0.0;
    std::vector<double> nodes;
    std::vector<double> f;
    std::vector<double> d1;
    std::vector<double> d2;
    std::vector<std::array<double, 6>> coef;
    double s_lo = 0.0;
    double log_ratio = 0.0;
    double tail_b = 0.0;
    double tail_p = 0.0;

    double s_hi() const { return nodes.back(); }

    std::size_t locate(double s) const
    {
        const std::size_t last = nodes.size() - 2;
        if (s < s_lo)
            return 0;
        auto j = static_cast<std::size_t>(1.0 + std::floor(std::log(s / s_lo) / log_ratio));
        j = std::min(std::max<std::size_t>(j, 1), last);
        while (j > 0 && s < nodes[j])
            --j;
        while (j < last && s > nodes[j + 1])
            ++j;
        return j;
    }

    std::array<double, 3> eval(double s) const
    {
        if (s >= s_hi()) {
            const double sh = s_hi();
            const double p = tail_p;
            const double grad = radius - tail_b * std::pow(s, -p);
            const double curv = p * tail_b * std::pow(s, -p - 1.0);
            double integral;
            if (std::abs(p - 1.0) < 1e-12)
                integral = tail_b * std::log(s / sh);
            else
                integral = tail_b * (std::pow(s, 1.0 - p) - std::pow(sh, 1.0 - p)) / (1.0 - p);
            return {f.back() + radius * (s - sh) - integral, grad, curv};
        }
        const std::size_t j = locate(s);
        const double h = nodes[j + 1] - nodes[j];
        const double t = (s - nodes[j]) / h;
        const auto& a = coef[j];
        const double v = a[0] + t * (a[1] + t * (a[2] + t * (a[3] + t * (a[4] + t * a[5]))));
        const double dv = a[1] + t * (2 * a[2] + t * (3 * a[3] + t * (4 * a[4] + t * 5 * a[5])));
        const double ddv = 2 * a[2] + t * (6 * a[3] + t * (12 * a[4] + t * 20 * a[5]));
        return {v, dv / h, ddv / (h * h)};
    }
};

} // namespace detail

namespace {

std::shared_ptr<const detail::ConjugateTable> build_table(const RadialProfile& p, int n_nodes)
{
    validate_profile(p);
    if (n_nodes < 16)
        throw std::invalid_argument("tabulated cost needs at least 16 dual nodes");
    auto t = std::make_shared<detail::ConjugateTable>();
    const std::size_t n = p.r.size();
    t->radius = p.radius();

    // Largest dual radius whose maximizer stays well inside the sampled range.
    const std::size_t back = std::max<std::size_t>(16, n / 100);
    if (n < back + 4)
        throw std::invalid_argument("profile has too few samples to tabulate its conjugate");
    const std::size_t ie = n - 1 - back;
    const double s_hi = (p.phi[ie + 1] - p.phi[ie]) / (p.r[ie + 1] - p.r[ie]);
    if (!(s_hi > 0.0))
        throw std::invalid_argument("profile is flat; conjugate not strictly convex");

    t->s_lo = s_hi * 1e-4;
    const auto k = static_cast<std::size_t>(n_nodes);
    t->log_ratio = std::log(s_hi / t->s_lo) / static_cast<double>(k - 1);
    t->nodes.resize(k + 1);
    t->nodes[0] = 0.0;
    for (std::size_t j = 1; j <= k; ++j)
        t->nodes[j] = t->s_lo * std::exp(t->log_ratio * static_cast<double>(j - 1));
    t->nodes[k] = s_hi;

    t->f.resize(k + 1);
    t->d1.resize(k + 1);
    t->d2.resize(k + 1);
    t->f[0] = 0.0;
    t->d1[0] = 0.0;
    const double a0 = p.phi[1] / (p.r[1] * p.r[1]);
    if (!(a0 > 0.0))
        throw std::invalid_argument("profile has zero curvature at the origin; conjugate not C2");
    t->d2[0] = 1.0 / (2.0 * a0);
    for (std::size_t j = 1; j <= k; ++j) {
        const ConjugateSample cs = conjugate_sample(p, t->nodes[j]);
        if (!(cs.curvature > 0.0) || !std::isfinite(cs.curvature))
            throw std::invalid_argument("profile has an affine segment; conjugate not C2");
        t->f[j] = cs.value;
        t->d1[j] = cs.argmax;
        t->d2[j] = 1.0 / cs.curvature;
    }

    for (std::size_t j = 0; j < k; ++j) {
        const double ds = t->nodes[j + 1] - t->nodes[j];
        const double jump = t->d1[j + 1] - t->d1[j];
        const double predicted = 0.5 * (t->d2[j] + t->d2[j + 1]) * ds;
        if (!(jump > 0.0) || std::abs(jump - predicted) > 0.05 * jump + 1e-14)
            throw std::invalid_argument("conjugate gradient jumps; profile not strictly convex");
    }

    // Re-integrate values from (f', f''): sampled values carry ~1e-13 noise that the
    // quintic would amplify by 1/h^2 on the short geometric intervals near zero.
    for (std::size_t j = 0; j < k; ++j) {
        const double h = t->nodes[j + 1] - t->nodes[j];
        t->f[j + 1] = t->f[j] + 0.5 * h * (t->d1[j] + t->d1[j + 1]) + h * h / 12.0 * (t->d2[j] - t->d2[j + 1]);
    }

    t->coef.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        const double h = t->nodes[j + 1] - t->nodes[j];
        std::array<double, 6> a{};
        a[0] = t->f[j];
        a[1] = h * t->d1[j];
        a[2] = 0.5 * h * h * t->d2[j];
        const double f1 = t->f[j + 1] - (a[0] + a[1] + a[2]);
        const double g1 = h * t->d1[j + 1] - (a[1] + 2 * a[2]);
        const double c1 = h * h * t->d2[j + 1] - 2 * a[2];
        a[3] = 10 * f1 - 4 * g1 + 0.5 * c1;
        a[4] = -15 * f1 + 7 * g1 - c1;
        a[5] = 6 * f1 - 3 * g1 + 0.5 * c1;
        t->coef[j] = a;
    }

    const double gap = t->radius - t->d1[k];
    if (!(gap > 0.0) || gap > 0.05 * t->radius)
        throw std::invalid_argument("conjugate gradient does not saturate; profile must steepen toward its radius");
    t->tail_p = t->d2[k] * s_hi / gap;
    t->tail_b = gap * std::pow(s_hi, t->tail_p);

    for (std::size_t j = 0; j < k; ++j) {
        for (double frac : {0.2, 0.4, 0.6, 0.8}) {
            const double s = t->nodes[j] + frac * (t->nodes[j + 1] - t->nodes[j]);
            if (!(t->eval(s)[2] > 0.0))
                throw std::invalid_argument("computed conjugate not strictly convex");
        }
    }
    return t;
}

} // namespace

CostFunction CostFunction::relativistic(double c)
{
    if (!(c > 0.0) || !std::isfinite(c))
        throw std::invalid_argument("relativistic cost needs a finite positive speed c");
    return CostFunction(Relativistic{c});
}

CostFunction CostFunction::classical()
{
    return CostFunction(Classical{});
}

CostFunction CostFunction::tabulated(const RadialProfile& profile, int dual_nodes)
{
    return CostFunction(build_table(profile, dual_nodes));
}

CostKind CostFunction::kind() const
{
    return std::visit(Overloaded{[](const Relativistic&) { return CostKind::Relativistic; },
                                 [](const Classical&) { return CostKind::ClassicalQuadratic; },
                                 [](const Table&) { return CostKind::TabulatedRadial; }},
                      kind_);
}

std::string CostFunction::describe() const
{
    return std::visit(Overloaded{[](const Relativistic& r) {
                                     std::ostringstream os;
                                     os.precision(17);
                                     os << "relativistic(c=" << r.c << ")";
                                     return os.str();
                                 },
                                 [](const Classical&) { return std::string("classical"); },
                                 [](const Table& t) {
                                     std::ostringstream os;
                                     os.precision(17);
                                     os << "tabulated(c=" << t->radius << ")";
                                     return os.str();
                                 }},
                      kind_);
}

double CostFunction::dual_radial(double s) const
{
    return std::visit(Overloaded{[s](const Relativistic& r) {
                                     const double q = s / r.c;
                                     return s * s / (std::hypot(1.0, q) + 1.0);
                                 },
                                 [s](const Classical&) { return 0.5 * s * s; },
                                 [s](const Table& t) { return t->eval(s)[0]; }},
                      kind_);
}

namespace {

// For |z| beyond ~1e7 c the exact speed c - O(c^3/z^2) rounds to c; keep a few ulps
// of headroom so the magnitude stays strictly below the bound after vector scaling.
double saturate(double v, double c) { return std::min(v, c * (1.0 - 2e-15)); }

} // namespace

double CostFunction::dual_radial_d1(double s) const
{
    return std::visit(Overloaded{[s](const Relativistic& r) { return saturate(s / std::hypot(1.0, s / r.c), r.c); },
                                 [s](const Classical&) { return s; },
                                 [s](const Table& t) { return saturate(t->eval(s)[1], t->radius); }},
                      kind_);
}

double CostFunction::dual_radial_d2(double s) const
{
    return std::visit(Overloaded{[s](const Relativistic& r) {
                                     const double g = std::hypot(1.0, s / r.c);
                                     return 1.0 / (g * g * g);
                                 },
                                 [](const Classical&) { return 1.0; },
                                 [s](const Table& t) { return t->eval(s)[2]; }},
                      kind_);
}

double CostFunction::grad1(double z) const
{
    if (const auto* r = std::get_if<Relativistic>(&kind_)) {
        const double g = saturate(std::abs(z) / std::hypot(1.0, z / r->c), r->c);
        return z < 0.0 ? -g : g;
    }
    if (std::holds_alternative<Classical>(kind_))
        return z;
    const double g = dual_radial_d1(std::abs(z));
    return z < 0.0 ? -g : g;
}

double CostFunction::hess1(double z) const
{
    return dual_radial_d2(std::abs(z));
}

double CostFunction::dual_value(const Eigen::VectorXd& z) const
{
    return dual_radial(z.stableNorm());
}

Eigen::VectorXd CostFunction::dual_grad(const Eigen::VectorXd& z) const
{
    const double s = z.stableNorm();
    if (s == 0.0)
        return Eigen::VectorXd::Zero(z.size());
    return dual_radial_d1(s) * (z / s);
}

Eigen::MatrixXd CostFunction::dual_hess(const Eigen::VectorXd& z) const
{
    const auto d = z.size();
    const double s = z.stableNorm();
    if (s == 0.0)
        return dual_radial_d2(0.0) * Eigen::MatrixXd::Identity(d, d);
    const Eigen::VectorXd e = z / s;
    const double radial = dual_radial_d2(s);
    const double tangential = dual_radial_d1(s) / s;
    const Eigen::MatrixXd proj = e * e.transpose();
    return radial * proj + tangential * (Eigen::MatrixXd::Identity(d, d) - proj);
}

double CostFunction::speed_bound() const
{
    return std::visit(Overloaded{[](const Relativistic& r) { return r.c; },
                                 [](const Classical&) { return kInf; },
                                 [](const Table& t) { return t->radius; }},
                      kind_);
}

bool CostFunction::bounded() const
{
    return !std::holds_alternative<Classical>(kind_);
}

double CostFunction::tab_inverse_d1(const detail::ConjugateTable& t, double r) const
{
    if (r <= 0.0)
        return 0.0;
    if (r >= t.d1.back())
        return std::pow(t.tail_b / (t.radius - r), 1.0 / t.tail_p);
    auto it = std::upper_bound(t.d1.begin(), t.d1.end(), r);
    const auto j = static_cast<std::size_t>(it - t.d1.begin()) - 1;
    double lo = t.nodes[j];
    double hi = t.nodes[j + 1];
    double s = lo + (hi - lo) * (r - t.d1[j]) / (t.d1[j + 1] - t.d1[j]);
    for (int iter = 0; iter < 100; ++iter) {
        const auto v = t.eval(s);
        const double res = v[1] - r;
        if (res > 0.0)
            hi = s;
        else
            lo = s;
        double next = s - res / v[2];
        if (!(next > lo && next < hi))
            next = 0.5 * (lo + hi);
        if (std::abs(next - s) <= 1e-15 * std::max(1.0, s))
            return next;
        s = next;
    }
    return s;
}

double CostFunction::primal(double r) const
{
    r = std::abs(r);
    return std::visit(Overloaded{[r](const Relativistic& k) {
                                     if (r > k.c)
                                         return kInf;
                                     const double q = r / k.c;
                                     return r * r / (1.0 + std::sqrt((1.0 - q) * (1.0 + q)));
                                 },
                                 [r](const Classical&) { return 0.5 * r * r; },
                                 [this, r](const Table& t) {
                                     if (r >= t->radius)
                                         return kInf;
                                     const double s = tab_inverse_d1(*t, r);
                                     return r * s - t->eval(s)[0];
                                 }},
                      kind_);
}

double CostFunction::primal_d1(double r) const
{
    const double a = std::abs(r);
    const double v = std::visit(Overloaded{[a](const Relativistic& k) {
                                               if (a >= k.c)
                                                   return kInf;
                                               const double q = a / k.c;
                                               return a / std::sqrt((1.0 - q) * (1.0 + q));
                                           },
                                           [a](const Classical&) { return a; },
                                           [this, a](const Table& t) {
                                               if (a >= t->radius)
                                                   return kInf;
                                               return tab_inverse_d1(*t, a);
                                           }},
                                kind_);
    return r < 0.0 ? -v : v;
}

double CostFunction::primal_d2(double r) const
{
    const double a = std::abs(r);
    return std::visit(Overloaded{[a](const Relativistic& k) {
                                     if (a >= k.c)
                                         return kInf;
                                     const double q = a / k.c;
                                     const double w = (1.0 - q) * (1.0 + q);
                                     return 1.0 / (w * std::sqrt(w));
                                 },
                                 [](const Classical&) { return 1.0; },
                                 [this, a](const Table& t) {
                                     if (a >= t->radius)
                                         return kInf;
                                     return 1.0 / t->eval(tab_inverse_d1(*t, a))[2];
                                 }},
                      kind_);
}

} // namespace fluxlim
