#include "fluxlim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fluxlim/numeric.hpp"

namespace fluxlim {

Grid1D::Grid1D(double x_min, double x_max, int n_cells)
    : x_min_(x_min), x_max_(x_max), n_cells_(n_cells), dx_((x_max - x_min) / n_cells)
{
    if (!(x_max > x_min) || !std::isfinite(x_min) || !std::isfinite(x_max))
        throw std::invalid_argument("grid requires finite x_max > x_min");
    if (n_cells < 2)
        throw std::invalid_argument("grid requires n_cells >= 2");
}

std::vector<double> Grid1D::centers() const
{
    std::vector<double> xs(static_cast<std::size_t>(n_cells_));
    for (int i = 0; i < n_cells_; ++i)
        xs[static_cast<std::size_t>(i)] = center(i);
    return xs;
}

DensityField::DensityField(Grid1D g, std::vector<double> v) : grid(g), values(std::move(v))
{
    if (static_cast<int>(values.size()) != grid.n_cells())
        throw std::invalid_argument("density size does not match grid");
}

DensityField::DensityField(Grid1D g, double constant)
    : grid(g), values(static_cast<std::size_t>(g.n_cells()), constant)
{
}

QuantileField::QuantileField(std::vector<double> positions) : positions_(std::move(positions))
{
    if (positions_.empty())
        throw std::invalid_argument("quantile field is empty");
    for (std::size_t j = 1; j < positions_.size(); ++j) {
        if (!(positions_[j] > positions_[j - 1]))
            throw std::invalid_argument("quantile positions must be strictly increasing");
    }
}

double mass(const DensityField& u)
{
    return u.grid.dx() * ordered_sum(u.values);
}

QuantileField density_to_quantiles(const DensityField& u, int n_quantiles)
{
    if (n_quantiles < 1)
        throw std::invalid_argument("need at least one quantile");
    const Grid1D& g = u.grid;
    const int n = g.n_cells();

    // cumulative mass at cell edges
    std::vector<double> cdf(static_cast<std::size_t>(n) + 1, 0.0);
    KahanSum acc;
    for (int i = 0; i < n; ++i) {
        if (u[i] < 0.0 || !std::isfinite(u[i]))
            throw std::invalid_argument("density must be finite and nonnegative");
        acc += u[i];
        cdf[static_cast<std::size_t>(i) + 1] = acc.value();
    }
    const double total = cdf.back();
    if (!(total > 0.0))
        throw std::invalid_argument("empty density");
    for (double& c : cdf)
        c /= total;
    cdf.back() = 1.0;

    std::vector<double> xs(static_cast<std::size_t>(n_quantiles));
    for (int j = 0; j < n_quantiles; ++j) {
        const double p = (j + 0.5) / n_quantiles;
        // leftmost edge k >= 1 with cdf[k] >= p; the quantile lies in cell k-1
        auto it = std::lower_bound(cdf.begin() + 1, cdf.end(), p);
        const auto k = static_cast<int>(it - cdf.begin());
        const double lo = cdf[static_cast<std::size_t>(k) - 1];
        const double hi = cdf[static_cast<std::size_t>(k)];
        const double frac = (p - lo) / (hi - lo);
        xs[static_cast<std::size_t>(j)] = g.edge(k - 1) + frac * g.dx();
    }
    return QuantileField(std::move(xs));
}

DensityField quantiles_to_density(const QuantileField& q, const Grid1D& grid)
{
    const int m = q.size();
    if (m < 2)
        throw std::invalid_argument("need at least two quantiles to reconstruct a density");
    const auto xs = q.positions();
    if (xs.front() < grid.x_min() || xs.back() > grid.x_max())
        throw std::invalid_argument("support exceeds grid");

    // Piecewise-linear CDF through (X_j, (j - 1/2)/M); the half-mass tails extend
    // half a gap beyond the outer quantiles, clipped to the grid.
    std::vector<double> bx;
    std::vector<double> by;
    bx.reserve(static_cast<std::size_t>(m) + 2);
    by.reserve(static_cast<std::size_t>(m) + 2);
    const double left = std::max(grid.x_min(), xs[0] - 0.5 * (xs[1] - xs[0]));
    const double right = std::min(grid.x_max(), xs[m - 1] + 0.5 * (xs[m - 1] - xs[m - 2]));
    if (left < xs[0]) {
        bx.push_back(left);
        by.push_back(0.0);
    }
    for (int j = 0; j < m; ++j) {
        bx.push_back(xs[static_cast<std::size_t>(j)]);
        by.push_back((j + 0.5) / m);
    }
    if (right > xs[m - 1]) {
        bx.push_back(right);
        by.push_back(1.0);
    }

    auto cdf_at = [&](double x) {
        if (x <= bx.front())
            return x < bx.front() ? 0.0 : by.front();
        if (x >= bx.back())
            return 1.0;
        auto it = std::upper_bound(bx.begin(), bx.end(), x);
        const auto k = static_cast<std::size_t>(it - bx.begin());
        const double t = (x - bx[k - 1]) / (bx[k] - bx[k - 1]);
        return by[k - 1] + t * (by[k] - by[k - 1]);
    };

    const int n = grid.n_cells();
    std::vector<double> edge_cdf(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i)
        edge_cdf[static_cast<std::size_t>(i)] = cdf_at(grid.edge(i));
    edge_cdf.front() = 0.0;
    edge_cdf.back() = 1.0;

    DensityField u(grid);
    for (int i = 0; i < n; ++i)
        u[i] = (edge_cdf[static_cast<std::size_t>(i) + 1] - edge_cdf[static_cast<std::size_t>(i)]) / grid.dx();
    return u;
}

double l1_distance(const DensityField& a, const DensityField& b)
{
    if (!(a.grid == b.grid))
        throw std::invalid_argument("l1_distance: grids differ");
    KahanSum acc;
    for (int i = 0; i < a.size(); ++i)
        acc += std::abs(a[i] - b[i]);
    return a.grid.dx() * acc.value();
}

void write_csv(std::ostream& out, const DensityField& u)
{
    out << "x,u\n";
    char line[96];
    for (int i = 0; i < u.size(); ++i) {
        std::snprintf(line, sizeof line, "%.17g,%.17g\n", u.grid.center(i), u[i]);
        out << line;
    }
}

void write_csv(const std::string& path, const DensityField& u)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open " + path + " for writing");
    write_csv(out, u);
}

DensityField read_csv(const std::string& path, const Grid1D& grid)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::string line;
    std::getline(in, line);
    if (line.rfind("x,u", 0) != 0)
        throw std::runtime_error(path + ": expected header `x,u`");

    std::vector<double> xs;
    std::vector<double> us;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::istringstream row(line);
        double x = 0.0;
        double v = 0.0;
        char comma = 0;
        if (!(row >> x >> comma >> v) || comma != ',')
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed row");
        if (!xs.empty() && !(x > xs.back()))
            throw std::runtime_error(path + ": x must be strictly increasing");
        xs.push_back(x);
        us.push_back(v);
    }
    if (xs.size() < 2)
        throw std::runtime_error(path + ": need at least two rows");

    // linear interpolation onto the grid centers, zero outside the sampled range
    DensityField u(grid);
    for (int i = 0; i < grid.n_cells(); ++i) {
        const double x = grid.center(i);
        if (x < xs.front() || x > xs.back())
            continue;
        auto it = std::upper_bound(xs.begin(), xs.end(), x);
        if (it == xs.end()) {
            u[i] = us.back();
            continue;
        }
        const auto k = static_cast<std::size_t>(it - xs.begin());
        const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
        u[i] = us[k - 1] + t * (us[k] - us[k - 1]);
    }
    return u;
}

} // namespace fluxlim
