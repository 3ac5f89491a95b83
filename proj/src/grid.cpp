#include "wavelab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wavelab {

PeriodicGrid::PeriodicGrid(std::vector<int> points_per_axis, std::vector<double> circumference,
                           Density gamma)
    : points_(std::move(points_per_axis)), circumference_(std::move(circumference)),
      gamma_(std::move(gamma)) {
    if (points_.empty() || points_.size() > 2) {
        throw WavelabError("grid dimension must be 1 or 2");
    }
    if (circumference_.empty()) {
        circumference_.assign(points_.size(), 2.0 * std::numbers::pi);
    }
    if (circumference_.size() != points_.size()) {
        throw WavelabError("circumference must be given for every axis");
    }
    size_ = 1;
    cell_volume_ = 1.0;
    for (std::size_t a = 0; a < points_.size(); ++a) {
        if (points_[a] < 8) {
            throw WavelabError("grid needs at least 8 points per axis");
        }
        if (!(circumference_[a] > 0.0)) {
            throw WavelabError("circumference must be positive");
        }
        spacing_.push_back(circumference_[a] / points_[a]);
        size_ *= static_cast<std::size_t>(points_[a]);
        cell_volume_ *= spacing_[a];
    }
    gamma_nodes_.assign(size_, 1.0);
    gamma_cells_.assign(size_, 1.0);
    if (gamma_) {
        for (std::size_t n = 0; n < size_; ++n) {
            gamma_nodes_[n] = gamma_(node_position(n));
            gamma_cells_[n] = gamma_(cell_center(n));
            if (!(gamma_nodes_[n] > 0.0) || !(gamma_cells_[n] > 0.0)) {
                throw WavelabError("density gamma must be strictly positive");
            }
        }
    }
}

std::shared_ptr<const PeriodicGrid> PeriodicGrid::make(std::vector<int> points_per_axis,
                                                       std::vector<double> circumference,
                                                       Density gamma) {
    return std::make_shared<const PeriodicGrid>(std::move(points_per_axis),
                                                std::move(circumference), std::move(gamma));
}

double PeriodicGrid::min_spacing() const {
    return *std::min_element(spacing_.begin(), spacing_.end());
}

std::size_t PeriodicGrid::index(int i, int j) const {
    const int n0 = points_[0];
    i = ((i % n0) + n0) % n0;
    if (dim() == 1) {
        return static_cast<std::size_t>(i);
    }
    const int n1 = points_[1];
    j = ((j % n1) + n1) % n1;
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(n0) * static_cast<std::size_t>(j);
}

std::array<int, 2> PeriodicGrid::multi_index(std::size_t node) const {
    const auto n0 = static_cast<std::size_t>(points_[0]);
    return {static_cast<int>(node % n0), static_cast<int>(node / n0)};
}

std::size_t PeriodicGrid::shift(std::size_t node, int axis, int offset) const {
    auto ij = multi_index(node);
    ij[axis] += offset;
    return index(ij[0], ij[1]);
}

Point PeriodicGrid::node_position(std::size_t node) const {
    const auto ij = multi_index(node);
    Point x{0.0, 0.0};
    for (int a = 0; a < dim(); ++a) {
        x[a] = ij[a] * spacing_[a];
    }
    return x;
}

Point PeriodicGrid::cell_center(std::size_t cell) const {
    const auto ij = multi_index(cell);
    Point x{0.0, 0.0};
    for (int a = 0; a < dim(); ++a) {
        x[a] = (ij[a] + 0.5) * spacing_[a];
    }
    return x;
}

double PeriodicGrid::wrap_displacement(int axis, double d) const {
    const double L = circumference_[axis];
    d = std::fmod(d, L);
    if (d < -0.5 * L) d += L;
    if (d >= 0.5 * L) d -= L;
    return d;
}

// ---------------------------------------------------------------------------

GridFunction::GridFunction(GridPtr grid, std::vector<double> values, std::optional<double> time)
    : grid_(std::move(grid)), values_(std::move(values)), time_(time) {
    if (!grid_) throw WavelabError("grid function needs a grid");
    if (values_.size() != grid_->size()) {
        throw WavelabError("grid function size does not match grid node count");
    }
}

GridFunction::GridFunction(GridPtr grid, double fill)
    : grid_(std::move(grid)), values_(grid_ ? grid_->size() : 0, fill) {
    if (!grid_) throw WavelabError("grid function needs a grid");
}

GridFunction GridFunction::sample(GridPtr grid, const std::function<double(const Point&)>& f,
                                  std::optional<double> time) {
    std::vector<double> v(grid->size());
    for (std::size_t n = 0; n < v.size(); ++n) {
        v[n] = f(grid->node_position(n));
    }
    return GridFunction(std::move(grid), std::move(v), time);
}

bool GridFunction::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double GridFunction::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

double GridFunction::min() const { return *std::min_element(values_.begin(), values_.end()); }
double GridFunction::max() const { return *std::max_element(values_.begin(), values_.end()); }

void GridFunction::check_same_grid(const GridFunction& o) const {
    if (grid_ != o.grid_ && (grid_->size() != o.grid_->size() || grid_->dim() != o.grid_->dim())) {
        throw WavelabError("grid functions live on different grids");
    }
}

GridFunction& GridFunction::operator+=(const GridFunction& o) {
    check_same_grid(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& o) {
    check_same_grid(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
}

GridFunction& GridFunction::operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
}

GridFunction GridFunction::times(const GridFunction& o) const {
    check_same_grid(o);
    GridFunction r = *this;
    for (std::size_t i = 0; i < values_.size(); ++i) r.values_[i] *= o.values_[i];
    return r;
}

// ---------------------------------------------------------------------------

GridFunction diff(const GridFunction& f, int axis, DiffScheme scheme) {
    const auto& grid = f.g();
    if (axis < 0 || axis >= grid.dim()) {
        throw WavelabError("diff: axis out of range");
    }
    const double h = grid.spacing(axis);
    GridFunction r(f.grid(), 0.0);
    r.set_time_tag(f.time_tag());
    for (std::size_t n = 0; n < f.size(); ++n) {
        const std::size_t p = grid.shift(n, axis, 1);
        const std::size_t m = grid.shift(n, axis, -1);
        switch (scheme) {
        case DiffScheme::centered2: r[n] = (f[p] - f[m]) / (2.0 * h); break;
        case DiffScheme::forward1: r[n] = (f[p] - f[n]) / h; break;
        case DiffScheme::backward1: r[n] = (f[n] - f[m]) / h; break;
        }
    }
    return r;
}

double integrate(const GridFunction& f) {
    const auto& grid = f.g();
    double s = 0.0;
    for (std::size_t n = 0; n < f.size(); ++n) s += f[n] * grid.gamma(n);
    return s * grid.cell_volume();
}

double integrate_lebesgue(const GridFunction& f) {
    double s = 0.0;
    for (double v : f.values()) s += v;
    return s * f.g().cell_volume();
}

namespace detail {

GridFunction convolve(const GridFunction& f, const GridFunction& kernel) {
    const auto& grid = f.g();
    if (kernel.size() != f.size()) {
        throw WavelabError("convolve: kernel and field live on different grids");
    }
    // Only the kernel's support contributes; mollifier kernels are compact.
    std::vector<std::pair<std::array<int, 2>, double>> support;
    for (std::size_t j = 0; j < kernel.size(); ++j) {
        if (kernel[j] != 0.0) support.emplace_back(grid.multi_index(j), kernel[j]);
    }
    const double vol = grid.cell_volume();
    GridFunction r(f.grid(), 0.0);
    r.set_time_tag(f.time_tag());
    for (std::size_t n = 0; n < f.size(); ++n) {
        const auto ij = grid.multi_index(n);
        double s = 0.0;
        for (const auto& [off, w] : support) {
            s += f[grid.index(ij[0] - off[0], ij[1] - off[1])] * w;
        }
        r[n] = s * vol;
    }
    return r;
}

}  // namespace detail

GridFunction convolve_periodic(const GridFunction& f, const GridFunction& kernel) {
    for (double v : kernel.values()) {
        if (v < 0.0) throw WavelabError("convolve_periodic: kernel must be nonnegative");
    }
    const double mass = integrate_lebesgue(kernel);
    if (std::abs(mass - 1.0) > 1e-12) {
        throw WavelabError("convolve_periodic: kernel is not normalized (mass " +
                           std::to_string(mass) + ")");
    }
    return detail::convolve(f, kernel);
}

}  // namespace wavelab
