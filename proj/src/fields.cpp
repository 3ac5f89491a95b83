#include "wavelab/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace wavelab {

std::string to_string(Regularity r) {
    switch (r) {
    case Regularity::smooth: return "smooth";
    case Regularity::c1: return "C1";
    case Regularity::lipschitz: return "lipschitz";
    case Regularity::bounded: return "bounded";
    }
    return "unknown";
}

MetricField::MetricField(int dim, Evaluator eval, Regularity tag, TimeWindow window,
                         Bounds declared, bool static_in_time)
    : dim_(dim), eval_(std::move(eval)), tag_(tag), window_(window), bounds_(std::move(declared)),
      static_(static_in_time) {
    if (dim_ < 1 || dim_ > 2) throw WavelabError("metric dimension must be 1 or 2");
    if (!eval_) throw WavelabError("metric needs an evaluator");
    if (!(window_.t_max > window_.t_min)) throw WavelabError("metric window is empty");
    if (!bounds_) {
        bounds_ = [](double) { return Envelope{0.0, std::numeric_limits<double>::infinity()}; };
    }
}

Sym2 MetricField::operator()(double t, const Point& x) const {
    const Matrix2 m = eval_(t, x);
    if (dim_ == 1) return {m[0][0], 0.0, 0.0};
    return {m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]};
}

std::vector<Sym2> MetricField::sample_nodes(const PeriodicGrid& grid, double t) const {
    std::vector<Sym2> out(grid.size());
    for (std::size_t n = 0; n < grid.size(); ++n) out[n] = (*this)(t, grid.node_position(n));
    return out;
}

GridFunction Coefficient::sample(const GridPtr& grid, double t) const {
    if (!f) return GridFunction(grid, 0.0);
    GridFunction r = GridFunction::sample(grid, [&](const Point& x) { return f(t, x); }, t);
    return r;
}

namespace {

std::vector<double> sample_times_in(TimeWindow w, int count) {
    std::vector<double> ts(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        ts[static_cast<std::size_t>(k)] = w.t_min + w.length() * k / (count - 1);
    }
    return ts;
}

double sup_abs(const Coefficient& c, const PeriodicGrid& grid, const std::vector<double>& ts) {
    if (c.is_zero()) return 0.0;
    double m = 0.0;
    for (double t : ts) {
        for (std::size_t n = 0; n < grid.size(); ++n) {
            m = std::max(m, std::abs(c(t, grid.node_position(n))));
        }
    }
    return m;
}

/// Eigenvalues of a symmetric 2x2 block (or the scalar in 1d).
std::pair<double, double> eigen_range(const Matrix2& m, int dim) {
    if (dim == 1) return {m[0][0], m[0][0]};
    const double tr = m[0][0] + m[1][1];
    const double det = m[0][0] * m[1][1] - m[0][1] * m[0][1];
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    return {0.5 * tr - disc, 0.5 * tr + disc};
}

}  // namespace

FirstOrderOperator::Sup FirstOrderOperator::sup_norms(const PeriodicGrid& grid, TimeWindow window,
                                                      int sample_times) const {
    const auto ts = sample_times_in(window, std::max(sample_times, 2));
    Sup s;
    s.b0 = sup_abs(b0, grid, ts);
    // |b| is measured as the sup of the Euclidean length of (b^1, b^2).
    if (!b[0].is_zero() || !b[1].is_zero()) {
        for (double t : ts) {
            for (std::size_t n = 0; n < grid.size(); ++n) {
                const Point x = grid.node_position(n);
                const double v0 = b[0](t, x);
                const double v1 = grid.dim() > 1 ? b[1](t, x) : 0.0;
                s.b = std::max(s.b, std::hypot(v0, v1));
            }
        }
    }
    s.c = sup_abs(c, grid, ts);
    return s;
}

// ---------------------------------------------------------------------------

Envelope validate_ellipticity(const MetricField& metric, const PeriodicGrid& grid,
                              TimeWindow window, int sample_times) {
    if (sample_times < 2) throw WavelabError("validate_ellipticity: need at least 2 sample times");
    if (metric.dim() != grid.dim()) throw WavelabError("metric and grid dimensions differ");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double t : sample_times_in(window, sample_times)) {
        const Envelope declared = metric.declared_bounds(t);
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t n = 0; n < grid.size(); ++n) {
                const Point x = pass == 0 ? grid.node_position(n) : grid.cell_center(n);
                const Matrix2 m = metric.matrix(t, x);
                if (grid.dim() == 2) {
                    const double scale = std::abs(m[0][1]) + std::abs(m[1][0]) + 1.0;
                    if (std::abs(m[0][1] - m[1][0]) > 1e-12 * scale) {
                        throw WavelabError("metric is not symmetric at a sample point");
                    }
                }
                const auto [e0, e1] = eigen_range(m, grid.dim());
                if (!(e0 > 0.0) || !std::isfinite(e1)) {
                    throw WavelabError("metric has a non-positive eigenvalue");
                }
                const double tol = 1e-9 * std::max(1.0, e1);
                if (e0 < declared.lower - tol || e1 > declared.upper + tol) {
                    throw WavelabError("metric leaves its declared ellipticity bounds");
                }
                lo = std::min(lo, e0);
                hi = std::max(hi, e1);
            }
        }
    }
    return {lo, hi};
}

// ---------------------------------------------------------------------------

std::vector<Sym2> cell_flux_tensor(const PeriodicGrid& grid, const MetricField& metric, double t,
                                   double scale) {
    std::vector<Sym2> out(grid.size());
    for (std::size_t c = 0; c < grid.size(); ++c) {
        Sym2 g = metric(t, grid.cell_center(c));
        const double w = scale * grid.gamma_cell(c);
        out[c] = {w * g.xx, w * g.xy, w * g.yy};
    }
    return out;
}

std::array<double, 2> cell_gradient(const PeriodicGrid& grid, std::span<const double> u,
                                    std::size_t cell) {
    if (grid.dim() == 1) {
        return {(u[grid.shift(cell, 0, 1)] - u[cell]) / grid.spacing(0), 0.0};
    }
    const std::size_t n00 = cell;
    const std::size_t n10 = grid.shift(cell, 0, 1);
    const std::size_t n01 = grid.shift(cell, 1, 1);
    const std::size_t n11 = grid.shift(n10, 1, 1);
    const double g0 = 0.5 * ((u[n10] - u[n00]) + (u[n11] - u[n01])) / grid.spacing(0);
    const double g1 = 0.5 * ((u[n01] - u[n00]) + (u[n11] - u[n10])) / grid.spacing(1);
    return {g0, g1};
}

void apply_flux_divergence(const PeriodicGrid& grid, std::span<const Sym2> m,
                           std::span<const double> u, std::span<double> out) {
    const std::size_t n = grid.size();
    if (grid.dim() == 1) {
        const double h2 = grid.spacing(0) * grid.spacing(0);
        const auto N = static_cast<std::size_t>(grid.points(0));
        for (std::size_t i = 0; i < N; ++i) {
            const std::size_t ip = i + 1 == N ? 0 : i + 1;
            const std::size_t im = i == 0 ? N - 1 : i - 1;
            const double fp = m[i].xx * (u[ip] - u[i]);
            const double fm = m[im].xx * (u[i] - u[im]);
            out[i] = (fp - fm) / (h2 * grid.gamma(i));
        }
        return;
    }
    std::fill(out.begin(), out.end(), 0.0);
    const double h0 = grid.spacing(0);
    const double h1 = grid.spacing(1);
    for (std::size_t c = 0; c < n; ++c) {
        const auto g = cell_gradient(grid, u, c);
        const double f0 = (m[c].xx * g[0] + m[c].xy * g[1]) / (2.0 * h0);
        const double f1 = (m[c].xy * g[0] + m[c].yy * g[1]) / (2.0 * h1);
        const std::size_t n00 = c;
        const std::size_t n10 = grid.shift(c, 0, 1);
        const std::size_t n01 = grid.shift(c, 1, 1);
        const std::size_t n11 = grid.shift(n10, 1, 1);
        out[n00] += f0 + f1;
        out[n10] += -f0 + f1;
        out[n01] += f0 - f1;
        out[n11] += -f0 - f1;
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= grid.gamma(i);
}

GridFunction dalembertian_spatial(const GridFunction& u, const MetricField& metric, double t) {
    const auto& grid = u.g();
    if (metric.dim() != grid.dim()) throw WavelabError("metric and grid dimensions differ");
    const auto m = cell_flux_tensor(grid, metric, t);
    GridFunction r(u.grid(), 0.0);
    r.set_time_tag(t);
    apply_flux_divergence(grid, m, u.values(), r.values());
    return r;
}

GridFunction nondivergence_spatial(const GridFunction& u, const MetricField& metric, double t) {
    const auto& grid = u.g();
    const auto g = metric.sample_nodes(grid, t);
    GridFunction r(u.grid(), 0.0);
    r.set_time_tag(t);
    const double h0 = grid.spacing(0);
    for (std::size_t n = 0; n < u.size(); ++n) {
        const double d00 =
            (u[grid.shift(n, 0, 1)] - 2.0 * u[n] + u[grid.shift(n, 0, -1)]) / (h0 * h0);
        double v = g[n].xx * d00;
        if (grid.dim() == 2) {
            const double h1 = grid.spacing(1);
            const double d11 =
                (u[grid.shift(n, 1, 1)] - 2.0 * u[n] + u[grid.shift(n, 1, -1)]) / (h1 * h1);
            const std::size_t pp = grid.shift(grid.shift(n, 0, 1), 1, 1);
            const std::size_t pm = grid.shift(grid.shift(n, 0, 1), 1, -1);
            const std::size_t mp = grid.shift(grid.shift(n, 0, -1), 1, 1);
            const std::size_t mm = grid.shift(grid.shift(n, 0, -1), 1, -1);
            const double d01 = (u[pp] - u[pm] - u[mp] + u[mm]) / (4.0 * h0 * h1);
            v += 2.0 * g[n].xy * d01 + g[n].yy * d11;
        }
        r[n] = v;
    }
    return r;
}

GridFunction apply_first_order(const StateVector& state, const FirstOrderOperator& op, double t) {
    const auto& grid = state.u.g();
    GridFunction r(state.u.grid(), 0.0);
    r.set_time_tag(t);
    if (!op.b0.is_zero()) r += op.b0.sample(state.u.grid(), t).times(state.ut);
    for (int a = 0; a < grid.dim(); ++a) {
        if (op.b[a].is_zero()) continue;
        r += op.b[a].sample(state.u.grid(), t).times(diff(state.u, a, DiffScheme::centered2));
    }
    if (!op.c.is_zero()) r += op.c.sample(state.u.grid(), t).times(state.u);
    return r;
}

NondivergenceForm to_nondivergence_form(const MetricField& metric, const FirstOrderOperator& op,
                                        const PeriodicGrid& grid) {
    NondivergenceForm out;
    out.op.b0 = op.b0;
    out.op.c = op.c;
    const bool rough = metric.regularity() == Regularity::lipschitz;
    out.approximate_derivative = rough;
    const int dim = metric.dim();
    std::array<double, 2> step{1e-5, 1e-5};
    if (rough) {
        for (int a = 0; a < dim; ++a) step[static_cast<std::size_t>(a)] = grid.spacing(a);
    }
    PeriodicGrid::Density density;
    if (!grid.unit_density()) {
        // The returned closures may outlive `grid`.
        auto shared = std::make_shared<const PeriodicGrid>(grid);
        density = [shared](const Point& x) { return shared->gamma_at(x); };
    }
    for (int beta = 0; beta < dim; ++beta) {
        Coefficient coef;
        coef.tag = rough ? Regularity::bounded : Regularity::smooth;
        coef.f = [metric, dim, beta, step, density, bb = op.b[static_cast<std::size_t>(beta)]](
                     double t, const Point& x) {
            double div = 0.0;
            const double gam = density ? density(x) : 1.0;
            for (int a = 0; a < dim; ++a) {
                Point xp = x, xm = x;
                const double d = step[static_cast<std::size_t>(a)];
                xp[static_cast<std::size_t>(a)] += d;
                xm[static_cast<std::size_t>(a)] -= d;
                const double gp = metric(t, xp)(a, beta) * (density ? density(xp) : 1.0);
                const double gm = metric(t, xm)(a, beta) * (density ? density(xm) : 1.0);
                div += (gp - gm) / (2.0 * d);
            }
            return -div / gam + bb(t, x);
        };
        out.op.b[static_cast<std::size_t>(beta)] = std::move(coef);
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

Matrix2 scalar_metric(double v) { return {{{v, 0.0}, {0.0, v}}}; }

double sign_of(double v) { return v >= 0.0 ? 1.0 : -1.0; }

constexpr double kCatalogHorizon = 12.0;

}  // namespace

std::vector<std::string> catalog_names() {
    return {"flat1d", "smooth1d", "lipschitz1d", "c1_1d", "flat2d"};
}

CatalogEntry catalog(std::string_view name, double epsilon) {
    using std::cos;
    using std::sin;
    const TimeWindow wide{-kCatalogHorizon, kCatalogHorizon};
    auto constant_bounds = [](double lo, double hi) {
        return [lo, hi](double) { return Envelope{lo, hi}; };
    };

    if (name == "flat1d") {
        MetricField g(1, [](double, const Point&) { return scalar_metric(1.0); }, Regularity::smooth,
                      wide, constant_bounds(1.0, 1.0), true);
        ExactSolution ex;
        ex.u = [](double t, const Point& x) { return sin(x[0] - t); };
        ex.ut = [](double t, const Point& x) { return -cos(x[0] - t); };
        return {"flat1d", 1, std::move(g), FirstOrderOperator{}, std::move(ex)};
    }

    if (name == "smooth1d") {
        MetricField g(
            1,
            [](double, const Point& x) {
                const double s = sin(x[0]);
                return scalar_metric(1.0 + 0.5 * s * s);
            },
            Regularity::smooth, wide, constant_bounds(1.0, 1.5), true);
        FirstOrderOperator op;
        op.b0.f = [](double, const Point&) { return 0.1; };
        op.b[0].f = [](double, const Point& x) { return 0.2 * cos(x[0]); };
        op.c.f = [](double, const Point&) { return 0.3; };
        // Manufactured u* = cos t sin x.
        ExactSolution ex;
        ex.u = [](double t, const Point& x) { return cos(t) * sin(x[0]); };
        ex.ut = [](double t, const Point& x) { return -sin(t) * sin(x[0]); };
        ex.f = [](double t, const Point& x) {
            const double s = sin(x[0]), c = cos(x[0]);
            const double u = cos(t) * s, ut = -sin(t) * s, utt = -cos(t) * s;
            const double ux = cos(t) * c, uxx = -cos(t) * s;
            const double g = 1.0 + 0.5 * s * s, gx = s * c;
            return utt - (gx * ux + g * uxx) + 0.1 * ut + 0.2 * c * ux + 0.3 * u;
        };
        return {"smooth1d", 1, std::move(g), std::move(op), std::move(ex)};
    }

    if (name == "lipschitz1d") {
        MetricField g(
            1, [](double, const Point& x) { return scalar_metric(1.0 + 0.5 * std::abs(sin(x[0]))); },
            Regularity::lipschitz, wide, constant_bounds(1.0, 1.5), true);
        FirstOrderOperator op;
        op.b[0].f = [](double, const Point& x) { return 0.2 * std::abs(cos(x[0])); };
        op.b[0].tag = Regularity::lipschitz;
        op.c.f = [](double, const Point& x) { return 0.25 * sign_of(sin(x[0])); };
        op.c.tag = Regularity::bounded;
        ExactSolution ex;
        ex.u = [](double t, const Point& x) { return cos(t) * sin(x[0]); };
        ex.ut = [](double t, const Point& x) { return -sin(t) * sin(x[0]); };
        ex.f = [](double t, const Point& x) {
            const double s = sin(x[0]), c = cos(x[0]);
            const double u = cos(t) * s, utt = -cos(t) * s;
            const double ux = cos(t) * c, uxx = -cos(t) * s;
            const double g = 1.0 + 0.5 * std::abs(s), gx = 0.5 * sign_of(s) * c;
            return utt - (gx * ux + g * uxx) + 0.2 * std::abs(c) * ux + 0.25 * sign_of(s) * u;
        };
        return {"lipschitz1d", 1, std::move(g), std::move(op), std::move(ex)};
    }

    if (name == "c1_1d") {
        const double eps = epsilon;
        MetricField g(
            1,
            [eps](double t, const Point& x) {
                const double s = sin(x[0]);
                return scalar_metric(1.0 + 0.5 * s * s + eps * t * cos(x[0]));
            },
            Regularity::c1, TimeWindow{-1.0, 1.0}, constant_bounds(1.0 - std::abs(eps), 1.5 + std::abs(eps)),
            false);
        ExactSolution ex;
        ex.u = [](double t, const Point& x) { return cos(t) * sin(x[0]); };
        ex.ut = [](double t, const Point& x) { return -sin(t) * sin(x[0]); };
        ex.f = [eps](double t, const Point& x) {
            const double s = sin(x[0]), c = cos(x[0]);
            const double utt = -cos(t) * s;
            const double ux = cos(t) * c, uxx = -cos(t) * s;
            const double g = 1.0 + 0.5 * s * s + eps * t * c;
            const double gx = s * c - eps * t * s;
            return utt - (gx * ux + g * uxx);
        };
        return {"c1_1d", 1, std::move(g), FirstOrderOperator{}, std::move(ex)};
    }

    if (name == "flat2d") {
        MetricField g(2, [](double, const Point&) { return scalar_metric(1.0); }, Regularity::smooth,
                      wide, constant_bounds(1.0, 1.0), true);
        const double w = std::numbers::sqrt2;
        ExactSolution ex;
        ex.u = [w](double t, const Point& x) { return sin(x[0] + x[1] - w * t); };
        ex.ut = [w](double t, const Point& x) { return -w * cos(x[0] + x[1] - w * t); };
        return {"flat2d", 2, std::move(g), FirstOrderOperator{}, std::move(ex)};
    }

    throw WavelabError("unknown catalog problem '" + std::string(name) + "'");
}

}  // namespace wavelab
