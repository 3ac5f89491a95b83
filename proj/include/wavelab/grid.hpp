#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wavelab {

/// Position on the torus. Only the first `dim` entries are meaningful.
using Point = std::array<double, 2>;

/// Raised for any violated precondition of the numerical routines.
class WavelabError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniform periodic grid on the flat torus (dim 1 or 2) carrying the
/// smooth density gamma of the measure dnu = gamma dx.
///
/// Node (i, j) sits at (i * h0, j * h1). Cell (i, j) is the square with
/// lower corner at node (i, j); its center is (i + 1/2, j + 1/2) * h.
class PeriodicGrid {
public:
    using Density = std::function<double(const Point&)>;

    PeriodicGrid(std::vector<int> points_per_axis, std::vector<double> circumference = {},
                 Density gamma = {});

    static std::shared_ptr<const PeriodicGrid> make(std::vector<int> points_per_axis,
                                                    std::vector<double> circumference = {},
                                                    Density gamma = {});

    int dim() const { return static_cast<int>(points_.size()); }
    int points(int axis) const { return points_.at(axis); }
    double circumference(int axis) const { return circumference_.at(axis); }
    double spacing(int axis) const { return spacing_.at(axis); }
    double min_spacing() const;
    std::size_t size() const { return size_; }
    double cell_volume() const { return cell_volume_; }

    /// Flat node index of multi-index (i, j); indices wrap periodically.
    std::size_t index(int i, int j = 0) const;
    std::array<int, 2> multi_index(std::size_t node) const;
    /// Neighbour of `node` shifted by `offset` along `axis`, periodic.
    std::size_t shift(std::size_t node, int axis, int offset) const;

    Point node_position(std::size_t node) const;
    Point cell_center(std::size_t cell) const;

    double gamma(std::size_t node) const { return gamma_nodes_[node]; }
    double gamma_at(const Point& x) const { return gamma_ ? gamma_(x) : 1.0; }
    double gamma_cell(std::size_t cell) const { return gamma_cells_[cell]; }
    std::span<const double> gamma_nodes() const { return gamma_nodes_; }
    bool unit_density() const { return !gamma_; }

    /// Signed periodic displacement along `axis`, mapped to [-L/2, L/2).
    double wrap_displacement(int axis, double d) const;

private:
    std::vector<int> points_;
    std::vector<double> circumference_;
    std::vector<double> spacing_;
    std::size_t size_ = 0;
    double cell_volume_ = 0.0;
    Density gamma_;
    std::vector<double> gamma_nodes_;
    std::vector<double> gamma_cells_;
};

using GridPtr = std::shared_ptr<const PeriodicGrid>;

/// Real scalar field sampled at the nodes of a periodic grid.
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(GridPtr grid, std::vector<double> values, std::optional<double> time = {});
    explicit GridFunction(GridPtr grid, double fill = 0.0);

    /// Samples `f` at every node.
    static GridFunction sample(GridPtr grid, const std::function<double(const Point&)>& f,
                               std::optional<double> time = {});

    const GridPtr& grid() const { return grid_; }
    const PeriodicGrid& g() const { return *grid_; }
    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    std::optional<double> time_tag() const { return time_; }
    void set_time_tag(std::optional<double> t) { time_ = t; }

    bool all_finite() const;
    double max_abs() const;
    double min() const;
    double max() const;

    GridFunction& operator+=(const GridFunction& o);
    GridFunction& operator-=(const GridFunction& o);
    GridFunction& operator*=(double a);

    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(double s, GridFunction a) { return a *= s; }
    friend GridFunction operator*(GridFunction a, double s) { return a *= s; }

    /// Pointwise product.
    GridFunction times(const GridFunction& o) const;

private:
    void check_same_grid(const GridFunction& o) const;

    GridPtr grid_;
    std::vector<double> values_;
    std::optional<double> time_;
};

enum class DiffScheme { centered2, forward1, backward1 };

/// Periodic finite difference along `axis`.
GridFunction diff(const GridFunction& f, int axis, DiffScheme scheme = DiffScheme::centered2);

/// Node-sum quadrature of f against dnu = gamma dx.
double integrate(const GridFunction& f);

/// Same as integrate() but with gamma ignored (Lebesgue measure).
double integrate_lebesgue(const GridFunction& f);

/// Periodic convolution (f * kernel)(x_i) = sum_j f(x_i - y_j) kernel(y_j) dV,
/// where the kernel is stored with its origin at node 0. The kernel must be
/// nonnegative with unit Lebesgue mass.
GridFunction convolve_periodic(const GridFunction& f, const GridFunction& kernel);

namespace detail {
/// Convolution without the normalization check (signed kernels such as
/// mollifier derivatives).
GridFunction convolve(const GridFunction& f, const GridFunction& kernel);
}  // namespace detail

}  // namespace wavelab
