#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fluxlim {

/// Uniform 1-D grid of n_cells cells on [x_min, x_max].
class Grid1D {
public:
    Grid1D(double x_min, double x_max, int n_cells);

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    int n_cells() const { return n_cells_; }
    double dx() const { return dx_; }

    double center(int i) const { return x_min_ + (i + 0.5) * dx_; }
    double edge(int i) const { return x_min_ + i * dx_; }
    std::vector<double> centers() const;

    bool operator==(const Grid1D&) const = default;

private:
    double x_min_;
    double x_max_;
    int n_cells_;
    double dx_;
};

/// Cell-averaged density (mass per unit length) on a Grid1D.
struct DensityField {
    DensityField(Grid1D grid, std::vector<double> values);
    explicit DensityField(Grid1D grid, double constant = 0.0);

    Grid1D grid;
    std::vector<double> values;

    int size() const { return grid.n_cells(); }
    double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }
    double& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
};

/// Monotone quantile samples X_j at levels (j - 1/2)/M of a unit-mass density.
class QuantileField {
public:
    explicit QuantileField(std::vector<double> positions);

    int size() const { return static_cast<int>(positions_.size()); }
    std::span<const double> positions() const { return positions_; }
    double operator[](int j) const { return positions_[static_cast<std::size_t>(j)]; }

private:
    std::vector<double> positions_;
};

double mass(const DensityField& u);

QuantileField density_to_quantiles(const DensityField& u, int n_quantiles);

DensityField quantiles_to_density(const QuantileField& q, const Grid1D& grid);

double l1_distance(const DensityField& a, const DensityField& b);

// CSV with header `x,u`, one row per cell center, 17 significant digits.
void write_csv(std::ostream& out, const DensityField& u);
void write_csv(const std::string& path, const DensityField& u);
DensityField read_csv(const std::string& path, const Grid1D& grid);

} // namespace fluxlim
