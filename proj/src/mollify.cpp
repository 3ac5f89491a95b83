#include "wavelab/mollify.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "wavelab/norms.hpp"

namespace wavelab {

GridFunction slice_at(const FieldFamily& w, double t) {
    if (w.empty()) throw WavelabError("slice_at: empty family");
    for (const auto& s : w) {
        if (s.time_tag() && std::abs(*s.time_tag() - t) <= 1e-12) return s;
    }
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        const auto t0 = w[i].time_tag(), t1 = w[i + 1].time_tag();
        if (!t0 || !t1) continue;
        if ((t - *t0) * (t - *t1) <= 0.0) {
            const double a = (t - *t0) / (*t1 - *t0);
            GridFunction r = (1.0 - a) * w[i] + a * w[i + 1];
            r.set_time_tag(t);
            return r;
        }
    }
    throw WavelabError("slice_at: time outside the family's tagged range");
}

namespace {

// Unnormalized unit bump (1 - r^2)^2 on r < 1 and its radial factor.
double bump(double r2) { return r2 < 1.0 ? (1.0 - r2) * (1.0 - r2) : 0.0; }

/// R * sum_a int |d_a rho| for the unit-mass bump of radius R (independent of
/// R), by midpoint quadrature.
double profile_constant(int dim) {
    if (dim == 1) {
        // rho(z) = A (1 - z^2)^2 on the unit interval.
        const int n = 200000;
        double mass = 0.0, var = 0.0;
        for (int i = 0; i < n; ++i) {
            const double z = -1.0 + (i + 0.5) * 2.0 / n;
            mass += bump(z * z);
            var += std::abs(4.0 * z * (1.0 - z * z));
        }
        return var / mass;
    }
    const int n = 1200;
    double mass = 0.0, var = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double x = -1.0 + (i + 0.5) * 2.0 / n;
            const double y = -1.0 + (j + 0.5) * 2.0 / n;
            const double r2 = x * x + y * y;
            if (r2 >= 1.0) continue;
            mass += bump(r2);
            var += 4.0 * (std::abs(x) + std::abs(y)) * (1.0 - r2);
        }
    }
    return var / mass;
}

}  // namespace

double default_base_radius(const PeriodicGrid& grid) {
    double L = grid.circumference(0);
    for (int a = 1; a < grid.dim(); ++a) L = std::min(L, grid.circumference(a));
    return L / 8.0;
}

Mollifier make_mollifier(GridPtr grid, int k, double base_radius) {
    if (k < 1) throw WavelabError("mollifier level must be >= 1");
    if (base_radius <= 0.0) base_radius = default_base_radius(*grid);
    for (int a = 0; a < grid->dim(); ++a) {
        if (base_radius > grid->circumference(a) / 4.0 + 1e-12) {
            throw WavelabError("mollifier radius exceeds a quarter circumference");
        }
    }
    Mollifier m;
    m.level = k;
    m.base_radius = base_radius;
    m.radius = base_radius / k;
    const int dim = grid->dim();
    const double R = m.radius;
    GridFunction profile(grid, 0.0);
    std::vector<GridFunction> gradient(static_cast<std::size_t>(dim), GridFunction(grid, 0.0));
    for (std::size_t n = 0; n < grid->size(); ++n) {
        const Point x = grid->node_position(n);
        std::array<double, 2> y{0.0, 0.0};
        double r2 = 0.0;
        for (int a = 0; a < dim; ++a) {
            y[static_cast<std::size_t>(a)] = grid->wrap_displacement(a, x[static_cast<std::size_t>(a)]);
            r2 += y[static_cast<std::size_t>(a)] * y[static_cast<std::size_t>(a)];
        }
        r2 /= R * R;
        profile[n] = bump(r2);
        if (r2 < 1.0) {
            for (int a = 0; a < dim; ++a) {
                gradient[static_cast<std::size_t>(a)][n] =
                    -4.0 * y[static_cast<std::size_t>(a)] / (R * R) * (1.0 - r2);
            }
        }
    }
    const double mass = integrate_lebesgue(profile);
    profile *= 1.0 / mass;
    for (auto& g : gradient) g *= 1.0 / mass;
    m.profile = std::move(profile);
    m.gradient = std::move(gradient);
    m.constant = profile_constant(dim);
    return m;
}

int grid_tied_level(const PeriodicGrid& grid, double base_radius) {
    if (base_radius <= 0.0) base_radius = default_base_radius(grid);
    return std::max(1, static_cast<int>(std::lround(base_radius / (4.0 * grid.min_spacing()))));
}

FieldFamily mollify_space(const FieldFamily& w, int k, double base_radius) {
    if (k < 1) throw WavelabError("mollify_space: k must be >= 1");
    FieldFamily out;
    if (w.empty()) return out;
    const Mollifier rho = make_mollifier(w.front().grid(), k, base_radius);
    out.reserve(w.size());
    for (const auto& slice : w) out.push_back(convolve_periodic(slice, rho.profile));
    return out;
}

double lipschitz_envelope(const MetricField& h, const PeriodicGrid& grid, double t) {
    const auto g = h.sample_nodes(grid, t);
    double worst = 0.0;
    const int dim = grid.dim();
    for (int a = 0; a < dim; ++a) {
        for (int b = a; b < dim; ++b) {
            std::array<double, 2> L{0.0, 0.0};
            for (int axis = 0; axis < dim; ++axis) {
                for (std::size_t n = 0; n < grid.size(); ++n) {
                    const std::size_t p = grid.shift(n, axis, 1);
                    L[static_cast<std::size_t>(axis)] = std::max(
                        L[static_cast<std::size_t>(axis)], std::abs(g[p](a, b) - g[n](a, b)) / grid.spacing(axis));
                }
            }
            worst = std::max(worst, std::hypot(L[0], L[1]));
        }
    }
    return worst;
}

CommutatorDefect commutator_defect(const MetricField& h, const FieldFamily& w, int k, double t,
                                   double base_radius) {
    if (k < 1) throw WavelabError("commutator_defect: k must be >= 1");
    const GridFunction wt = slice_at(w, t);
    const auto& grid = wt.g();
    const int dim = grid.dim();
    const Mollifier rho = make_mollifier(wt.grid(), k, base_radius);
    const auto g = h.sample_nodes(grid, t);

    CommutatorDefect out;
    out.field = GridFunction(wt.grid(), 0.0);
    out.field.set_time_tag(t);
    for (int beta = 0; beta < dim; ++beta) {
        const GridFunction dw = diff(wt, beta, DiffScheme::centered2);
        for (int a = 0; a < dim; ++a) {
            const GridFunction& drho = rho.gradient[static_cast<std::size_t>(a)];
            GridFunction hdw = dw;
            for (std::size_t n = 0; n < grid.size(); ++n) hdw[n] *= g[n](a, beta);
            const GridFunction first = detail::convolve(dw, drho);
            const GridFunction second = detail::convolve(hdw, drho);
            for (std::size_t n = 0; n < grid.size(); ++n) {
                out.field[n] += g[n](a, beta) * first[n] - second[n];
            }
        }
    }
    out.l2_norm = hk_norm(out.field, 0);
    out.lipschitz = lipschitz_envelope(h, grid, t);
    out.h1_norm = hk_norm(wt, 1);
    out.bound = rho.constant * out.lipschitz * out.h1_norm * std::sqrt(static_cast<double>(dim));
    return out;
}

namespace {

struct Stencil {
    std::vector<Point> offsets;
    std::vector<double> weights;
};

/// Midpoint quadrature of the bump on its support, independent of the grid,
/// so the smoothed coefficients keep only quadrature-weight-sized kinks.
Stencil space_stencil(double radius, int dim) {
    constexpr int per_radius = 16;
    const double step = radius / per_radius;
    Stencil s;
    double total = 0.0;
    const int m1 = dim > 1 ? 2 * per_radius : 1;
    for (int i = 0; i < 2 * per_radius; ++i) {
        for (int j = 0; j < m1; ++j) {
            const double y0 = -radius + (i + 0.5) * step;
            const double y1 = dim > 1 ? -radius + (j + 0.5) * step : 0.0;
            const double w = bump((y0 * y0 + y1 * y1) / (radius * radius));
            if (w == 0.0) continue;
            s.offsets.push_back(Point{y0, y1});
            s.weights.push_back(w);
            total += w;
        }
    }
    for (double& w : s.weights) w /= total;
    return s;
}

Stencil time_stencil(double radius, int half) {
    Stencil s;
    double total = 0.0;
    for (int m = -half; m <= half; ++m) {
        const double tau = half > 0 ? radius * m / (half + 1) : 0.0;
        const double w = half > 0 ? bump((tau / radius) * (tau / radius)) : 1.0;
        s.offsets.push_back(Point{tau, 0.0});
        s.weights.push_back(w);
        total += w;
    }
    for (double& w : s.weights) w /= total;
    return s;
}

double reflect_into(double t, TimeWindow w) {
    if (t < w.t_min) return std::min(w.t_max, 2.0 * w.t_min - t);
    if (t > w.t_max) return std::max(w.t_min, 2.0 * w.t_max - t);
    return t;
}

}  // namespace

RegularizedCoefficients regularize_coefficients(const MetricField& metric,
                                                const FirstOrderOperator& op,
                                                const PeriodicGrid& grid, int k, double base_radius,
                                                int time_half) {
    if (k < 1) throw WavelabError("regularize_coefficients: k must be >= 1");
    auto gp = std::make_shared<const PeriodicGrid>(grid);
    const Mollifier rho = make_mollifier(gp, k, base_radius);
    auto space = std::make_shared<const Stencil>(space_stencil(rho.radius, grid.dim()));
    const bool is_static = metric.static_in_time();
    auto time = std::make_shared<const Stencil>(time_stencil(rho.radius, is_static ? 0 : time_half));
    const TimeWindow window = metric.window();

    const Envelope env = validate_ellipticity(metric, grid, window, is_static ? 2 : 9);
    const double lo = 0.5 * env.lower, hi = 2.0 * env.upper;

    MetricField::Evaluator eval = [metric, space, time, window](double t, const Point& x) {
        Matrix2 acc{{{0.0, 0.0}, {0.0, 0.0}}};
        for (std::size_t m = 0; m < time->weights.size(); ++m) {
            const double tt = reflect_into(t - time->offsets[m][0], window);
            for (std::size_t j = 0; j < space->weights.size(); ++j) {
                const Point xs{x[0] - space->offsets[j][0], x[1] - space->offsets[j][1]};
                const Matrix2 g = metric.matrix(tt, xs);
                const double w = time->weights[m] * space->weights[j];
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b) acc[a][b] += w * g[a][b];
            }
        }
        return acc;
    };
    MetricField smoothed(metric.dim(), std::move(eval), Regularity::smooth, window,
                         [lo, hi](double) { return Envelope{lo, hi}; }, is_static);

    auto smooth_coefficient = [&](const Coefficient& c) {
        Coefficient out;
        if (c.is_zero()) return out;
        out.tag = Regularity::smooth;
        auto ctime = std::make_shared<const Stencil>(time_stencil(rho.radius, time_half));
        out.f = [f = c.f, space, ctime, window](double t, const Point& x) {
            double acc = 0.0;
            for (std::size_t m = 0; m < ctime->weights.size(); ++m) {
                const double tt = reflect_into(t - ctime->offsets[m][0], window);
                for (std::size_t j = 0; j < space->weights.size(); ++j) {
                    const Point xs{x[0] - space->offsets[j][0], x[1] - space->offsets[j][1]};
                    acc += ctime->weights[m] * space->weights[j] * f(tt, xs);
                }
            }
            return acc;
        };
        return out;
    };
    FirstOrderOperator smoothed_op;
    smoothed_op.b0 = smooth_coefficient(op.b0);
    smoothed_op.b[0] = smooth_coefficient(op.b[0]);
    smoothed_op.b[1] = smooth_coefficient(op.b[1]);
    smoothed_op.c = smooth_coefficient(op.c);
    return {std::move(smoothed), std::move(smoothed_op)};
}

}  // namespace wavelab
