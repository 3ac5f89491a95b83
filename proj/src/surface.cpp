#include "wavelab/surface.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

namespace wavelab {

std::string to_string(CausalType c) {
    switch (c) {
    case CausalType::spacelike: return "spacelike";
    case CausalType::null: return "null";
    case CausalType::weakly_spacelike: return "weakly_spacelike";
    case CausalType::timelike_invalid: return "timelike_invalid";
    }
    return "unknown";
}

std::size_t CharacteristicSurface::kink_count() const {
    return static_cast<std::size_t>(std::count(kink.begin(), kink.end(), char{1}));
}

namespace {

void fill_one_sided(CharacteristicSurface& s) {
    const auto& grid = s.phi.g();
    s.grad_forward.clear();
    s.grad_backward.clear();
    s.kink.assign(grid.size(), 0);
    double lip2 = 0.0;
    for (int a = 0; a < grid.dim(); ++a) {
        s.grad_forward.push_back(diff(s.phi, a, DiffScheme::forward1));
        s.grad_backward.push_back(diff(s.phi, a, DiffScheme::backward1));
        const double tol = std::sqrt(grid.spacing(a));
        for (std::size_t n = 0; n < grid.size(); ++n) {
            if (std::abs(s.grad_forward.back()[n] - s.grad_backward.back()[n]) > tol) {
                s.kink[n] = 1;
            }
        }
        const double m = s.grad_forward.back().max_abs();
        lip2 += m * m;
    }
    s.lipschitz_bound = std::sqrt(lip2);
}

double quad(const Sym2& g, double g0, double g1, int dim) {
    if (dim == 1) return g.xx * g0 * g0;
    return g.xx * g0 * g0 + 2.0 * g.xy * g0 * g1 + g.yy * g1 * g1;
}

/// g^{ab} d_a phi d_b phi at node n for the metric sampled at time t; kink
/// nodes average the two one-sided values.
double speed2(const CharacteristicSurface& s, const Sym2& g, std::size_t n) {
    const int dim = s.phi.g().dim();
    auto comp = [&](const std::vector<GridFunction>& gr, int a) {
        return a < dim ? gr[static_cast<std::size_t>(a)][n] : 0.0;
    };
    if (!s.kink[n]) return quad(g, comp(s.grad, 0), comp(s.grad, 1), dim);
    const double f = quad(g, comp(s.grad_forward, 0), comp(s.grad_forward, 1), dim);
    const double b = quad(g, comp(s.grad_backward, 0), comp(s.grad_backward, 1), dim);
    return 0.5 * (f + b);
}

GridFunction speed2_field(const CharacteristicSurface& s, const MetricField& metric, double shift) {
    const auto& grid = s.phi.g();
    if (metric.dim() != grid.dim()) throw WavelabError("metric and surface dimensions differ");
    GridFunction r(s.phi.grid(), 0.0);
    for (std::size_t n = 0; n < grid.size(); ++n) {
        const Sym2 g = metric(shift + s.phi[n], grid.node_position(n));
        r[n] = speed2(s, g, n);
    }
    return r;
}

}  // namespace

CharacteristicSurface make_surface(GridFunction phi, std::string name) {
    if (!phi.all_finite()) throw WavelabError("surface values must be finite");
    CharacteristicSurface s;
    s.name = std::move(name);
    s.phi = std::move(phi);
    for (int a = 0; a < s.phi.g().dim(); ++a) {
        s.grad.push_back(diff(s.phi, a, DiffScheme::centered2));
    }
    fill_one_sided(s);
    return s;
}

CharacteristicSurface make_surface(GridFunction phi, std::vector<GridFunction> grad,
                                   std::string name) {
    if (!phi.all_finite()) throw WavelabError("surface values must be finite");
    if (static_cast<int>(grad.size()) != phi.g().dim()) {
        throw WavelabError("surface gradient needs one component per axis");
    }
    CharacteristicSurface s;
    s.name = std::move(name);
    s.phi = std::move(phi);
    s.grad = std::move(grad);
    fill_one_sided(s);
    return s;
}

GridFunction eikonal_residual(const CharacteristicSurface& s, const MetricField& metric) {
    GridFunction r = speed2_field(s, metric, 0.0);
    for (double& v : r.values()) v -= 1.0;
    return r;
}

namespace {

CausalType classify_residual(const CharacteristicSurface& s, const GridFunction& r, double tol) {
    bool all_null = true;
    bool all_below = true;
    bool all_weak = true;
    bool any = false;
    for (std::size_t n = 0; n < r.size(); ++n) {
        if (s.kink[n]) continue;
        any = true;
        const double v = r[n];
        all_null = all_null && std::abs(v) <= tol;
        all_below = all_below && v <= -tol;
        all_weak = all_weak && v <= tol;
    }
    if (!any || all_null) return CausalType::null;
    if (all_below) return CausalType::spacelike;
    if (all_weak) return CausalType::weakly_spacelike;
    return CausalType::timelike_invalid;
}

}  // namespace

CausalType classify(const CharacteristicSurface& s, const MetricField& metric, double tol) {
    return classify_residual(s, eikonal_residual(s, metric), tol);
}

CharacteristicSurface classified(CharacteristicSurface s, const MetricField& metric, double tol) {
    s.classification = classify(s, metric, tol);
    return s;
}

GridFunction dnu0_density(const CharacteristicSurface& s, const MetricField& metric, double tol) {
    const GridFunction r = eikonal_residual(s, metric);
    if (classify_residual(s, r, tol) == CausalType::timelike_invalid) {
        throw WavelabError("dnu0_density: surface is timelike");
    }
    GridFunction d = r;
    for (double& v : d.values()) v = -v;
    return d;
}

CharacteristicSurface foliation_slice(const CharacteristicSurface& s, double t,
                                      const MetricField& metric, double tol) {
    CharacteristicSurface out = s;
    for (double& v : out.phi.values()) v += t;
    out.classification = classify(out, metric, tol);
    return out;
}

CharacteristicSurface eikonal_cone(GridPtr grid, const MetricField& metric, std::size_t vertex,
                                   double phi_vertex, int substeps) {
    if (grid->dim() != 1) throw WavelabError("eikonal_cone: dimension 1 only");
    if (substeps < 2) throw WavelabError("eikonal_cone: need at least 2 substeps");
    const int N = grid->points(0);
    const double h = grid->spacing(0);
    const double delta = h / substeps;
    const double xv = grid->node_position(vertex)[0];
    const std::size_t steps = static_cast<std::size_t>(N) * static_cast<std::size_t>(substeps) + 1;

    // Branch integration with Heun's method: dphi/dy = 1/sqrt(g(phi, xv + dir*y)).
    auto branch = [&](double dir) {
        std::vector<double> phi(steps + 1);
        phi[0] = phi_vertex;
        auto rate = [&](double p, double y) {
            const double g = metric(p, Point{xv + dir * y, 0.0}).xx;
            return 1.0 / std::sqrt(g);
        };
        for (std::size_t k = 0; k < steps; ++k) {
            const double y = k * delta;
            const double k1 = rate(phi[k], y);
            const double k2 = rate(phi[k] + delta * k1, y + delta);
            phi[k + 1] = phi[k] + 0.5 * delta * (k1 + k2);
        }
        return phi;
    };
    const auto right = branch(+1.0);
    const auto left = branch(-1.0);

    GridFunction phi(grid, 0.0);
    GridFunction grad(grid, 0.0);
    const auto vi = static_cast<int>(grid->multi_index(vertex)[0]);
    for (int j = 0; j < N; ++j) {
        const std::size_t n = grid->index(vi + j);
        const std::size_t kr = static_cast<std::size_t>(j) * static_cast<std::size_t>(substeps);
        const std::size_t kl = static_cast<std::size_t>(N - j) * static_cast<std::size_t>(substeps);
        const double pr = right[kr];
        const double pl = left[kl];
        if (j == 0) {
            phi[n] = phi_vertex;
            grad[n] = 0.0;
            continue;
        }
        if (pr <= pl) {
            phi[n] = pr;
            grad[n] = (right[kr + 1] - right[kr - 1]) / (2.0 * delta);
        } else {
            phi[n] = pl;
            grad[n] = -(left[kl + 1] - left[kl - 1]) / (2.0 * delta);
        }
    }
    return make_surface(std::move(phi), {std::move(grad)}, "cone");
}

std::vector<std::string> surface_names() { return {"cone", "flatcone", "slice", "sine", "sawtooth"}; }

CharacteristicSurface surface_catalog(std::string_view name, GridPtr grid,
                                      const MetricField& metric, double tol) {
    const int dim = grid->dim();
    auto flat_distance = [&]() {
        // Periodic Euclidean distance to the origin; analytic unit gradient.
        GridFunction phi(grid, 0.0);
        std::vector<GridFunction> grad(static_cast<std::size_t>(dim), GridFunction(grid, 0.0));
        for (std::size_t n = 0; n < grid->size(); ++n) {
            const Point x = grid->node_position(n);
            double r2 = 0.0;
            std::array<double, 2> d{0.0, 0.0};
            for (int a = 0; a < dim; ++a) {
                d[static_cast<std::size_t>(a)] = grid->wrap_displacement(a, x[static_cast<std::size_t>(a)]);
                r2 += d[static_cast<std::size_t>(a)] * d[static_cast<std::size_t>(a)];
            }
            const double r = std::sqrt(r2);
            phi[n] = r;
            for (int a = 0; a < dim; ++a) {
                grad[static_cast<std::size_t>(a)][n] = r > 0.0 ? d[static_cast<std::size_t>(a)] / r : 0.0;
            }
        }
        return make_surface(std::move(phi), std::move(grad), "cone");
    };
    auto cone = [&]() {
        if (dim == 1) return eikonal_cone(grid, metric);
        for (double t : {metric.window().t_min, 0.0, metric.window().t_max}) {
            for (std::size_t n = 0; n < grid->size(); n += 7) {
                const Sym2 g = metric(t, grid->node_position(n));
                if (std::abs(g.xx - 1.0) > 1e-14 || std::abs(g.yy - 1.0) > 1e-14 || std::abs(g.xy) > 1e-14) {
                    throw WavelabError("2d cone surfaces are only available for the flat metric");
                }
            }
        }
        return flat_distance();
    };

    CharacteristicSurface s;
    if (name == "cone") {
        s = cone();
    } else if (name == "flatcone") {
        CharacteristicSurface c = cone();
        const double cap = 0.5 * c.phi.max();
        GridFunction phi = c.phi;
        std::vector<GridFunction> grad = c.grad;
        for (std::size_t n = 0; n < phi.size(); ++n) {
            if (phi[n] >= cap) {
                phi[n] = cap;
                for (auto& g : grad) g[n] = 0.0;
            }
        }
        s = make_surface(std::move(phi), std::move(grad), "flatcone");
    } else if (name == "slice") {
        s = make_surface(GridFunction(grid, 0.0), "slice");
    } else if (name == "sine") {
        std::vector<GridFunction> grad;
        grad.push_back(GridFunction::sample(grid, [](const Point& x) { return 0.5 * std::cos(x[0]); }));
        if (dim == 2) grad.emplace_back(grid, 0.0);
        s = make_surface(GridFunction::sample(grid, [](const Point& x) { return 0.5 * std::sin(x[0]); }),
                         std::move(grad), "sine");
    } else if (name == "sawtooth") {
        GridFunction phi = GridFunction::sample(grid, [&](const Point& x) {
            return 2.0 * std::abs(grid->wrap_displacement(0, x[0]));
        });
        s = make_surface(std::move(phi), "sawtooth");
    } else {
        throw WavelabError("unknown surface '" + std::string(name) + "'");
    }
    s.classification = classify(s, metric, tol);
    return s;
}

// ---------------------------------------------------------------------------

TransformedProblem::TransformedProblem(MetricField metric, FirstOrderOperator op,
                                       CharacteristicSurface surface, double lambda)
    : metric_(std::move(metric)), op_(std::move(op)), surface_(std::move(surface)),
      lambda_(lambda) {
    const auto& grid = surface_.grid();
    phi_cells_.resize(grid.size());
    for (std::size_t c = 0; c < grid.size(); ++c) {
        if (grid.dim() == 1) {
            phi_cells_[c] = 0.5 * (surface_.phi[c] + surface_.phi[grid.shift(c, 0, 1)]);
        } else {
            const std::size_t n10 = grid.shift(c, 0, 1);
            phi_cells_[c] = 0.25 * (surface_.phi[c] + surface_.phi[n10] +
                                    surface_.phi[grid.shift(c, 1, 1)] +
                                    surface_.phi[grid.shift(n10, 1, 1)]);
        }
    }
}

void TransformedProblem::fill_coefficients(double s, std::span<double> a, std::span<double> c0,
                                           std::span<double> c1) const {
    const auto& grid = surface_.grid();
    const int dim = grid.dim();
    for (std::size_t n = 0; n < grid.size(); ++n) {
        const Sym2 g = metric_(s + surface_.phi[n], grid.node_position(n));
        a[n] = 1.0 - lambda_ * speed2(surface_, g, n);
        const double p0 = surface_.grad[0][n];
        const double p1 = dim > 1 ? surface_.grad[1][n] : 0.0;
        c0[n] = lambda_ * (g.xx * p0 + g.xy * p1);
        if (dim > 1) c1[n] = lambda_ * (g.xy * p0 + g.yy * p1);
    }
}

void TransformedProblem::fill_cell_coefficients(double s, std::span<double> a_nodes,
                                                std::span<double> c0_cells,
                                                std::span<double> c1_cells) const {
    const auto& grid = surface_.grid();
    const int dim = grid.dim();
    const double share = dim == 1 ? 0.5 : 0.25;
    std::fill(a_nodes.begin(), a_nodes.end(), 0.0);
    for (std::size_t c = 0; c < grid.size(); ++c) {
        const Sym2 g = metric_(s + phi_cells_[c], grid.cell_center(c));
        const auto d = cell_gradient(grid, surface_.phi.values(), c);
        const double c0 = lambda_ * (g.xx * d[0] + g.xy * d[1]);
        const double c1 = dim > 1 ? lambda_ * (g.xy * d[0] + g.yy * d[1]) : 0.0;
        c0_cells[c] = c0;
        if (dim > 1) c1_cells[c] = c1;
        const double a = 1.0 - (c0 * d[0] + c1 * d[1]);
        const std::size_t n10 = grid.shift(c, 0, 1);
        a_nodes[c] += share * a;
        a_nodes[n10] += share * a;
        if (dim > 1) {
            a_nodes[grid.shift(c, 1, 1)] += share * a;
            a_nodes[grid.shift(n10, 1, 1)] += share * a;
        }
    }
}

GridFunction TransformedProblem::a(double s) const {
    GridFunction a(surface_.phi.grid(), 0.0), c0(surface_.phi.grid(), 0.0), c1(surface_.phi.grid(), 0.0);
    fill_coefficients(s, a.values(), c0.values(), c1.values());
    a.set_time_tag(s);
    return a;
}

GridFunction TransformedProblem::cross(int axis, double s) const {
    if (axis < 0 || axis >= surface_.grid().dim()) throw WavelabError("cross: axis out of range");
    GridFunction a(surface_.phi.grid(), 0.0), c0(surface_.phi.grid(), 0.0), c1(surface_.phi.grid(), 0.0);
    fill_coefficients(s, a.values(), c0.values(), c1.values());
    GridFunction out = axis == 0 ? c0 : c1;
    out.set_time_tag(s);
    return out;
}

double TransformedProblem::a_min(double s0, double s1, int samples) const {
    double m = std::numeric_limits<double>::infinity();
    const auto& grid = surface_.grid();
    std::vector<double> a(grid.size()), c0(grid.size()), c1(grid.size());
    for (int k = 0; k < samples; ++k) {
        const double s = samples > 1 ? s0 + (s1 - s0) * k / (samples - 1) : s0;
        fill_cell_coefficients(s, a, c0, c1);
        m = std::min(m, *std::min_element(a.begin(), a.end()));
        if (metric_.static_in_time()) break;
    }
    return m;
}

double TransformedProblem::cross_max(double s0, double s1, int samples) const {
    double m = 0.0;
    const auto& grid = surface_.grid();
    std::vector<double> a(grid.size()), c0(grid.size()), c1(grid.size(), 0.0);
    for (int k = 0; k < samples; ++k) {
        const double s = samples > 1 ? s0 + (s1 - s0) * k / (samples - 1) : s0;
        fill_cell_coefficients(s, a, c0, c1);
        for (std::size_t n = 0; n < grid.size(); ++n) m = std::max(m, std::hypot(c0[n], c1[n]));
        if (metric_.static_in_time()) break;
    }
    return m;
}

TransformedProblem flatten(const MetricField& metric, const FirstOrderOperator& op,
                           const CharacteristicSurface& surface, double lambda, double tol) {
    if (!(lambda > 0.0) || !(lambda < 1.0)) {
        throw WavelabError("flatten: lambda must lie in (0, 1)");
    }
    if (classify(surface, metric, tol) == CausalType::timelike_invalid) {
        throw WavelabError("flatten: surface is timelike for the metric");
    }
    TransformedProblem p(metric, op, surface, lambda);
    const double amin = p.a_min(0.0, 0.0, 1);
    if (!(amin > 0.0)) throw WavelabError("flatten: d_s^2 coefficient is not positive");
    return p;
}

void write_surface_csv(std::ostream& os, const CharacteristicSurface& s, const MetricField& metric) {
    const auto& grid = s.grid();
    const GridFunction r = eikonal_residual(s, metric);
    os << "# wavelab surface v1 name=" << s.name << "\n";
    os << (grid.dim() == 1 ? "x" : "x,y") << ",phi,residual,kink_flag\n";
    os << std::setprecision(17);
    for (std::size_t n = 0; n < grid.size(); ++n) {
        const Point x = grid.node_position(n);
        os << x[0] << ',';
        if (grid.dim() == 2) os << x[1] << ',';
        os << s.phi[n] << ',' << r[n] << ',' << int(s.kink[n]) << '\n';
    }
}

}  // namespace wavelab
