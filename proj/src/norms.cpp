#include "wavelab/norms.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace wavelab {

namespace {

double cell_quadratic(const Sym2& g, const std::array<double, 2>& d, int dim) {
    if (dim == 1) return g.xx * d[0] * d[0];
    return g.xx * d[0] * d[0] + 2.0 * g.xy * d[0] * d[1] + g.yy * d[1] * d[1];
}

double phi_at_cell(const CharacteristicSurface& s, std::size_t c) {
    const auto& grid = s.grid();
    if (grid.dim() == 1) return 0.5 * (s.phi[c] + s.phi[grid.shift(c, 0, 1)]);
    const std::size_t n10 = grid.shift(c, 0, 1);
    return 0.25 * (s.phi[c] + s.phi[n10] + s.phi[grid.shift(c, 1, 1)] + s.phi[grid.shift(n10, 1, 1)]);
}

double max_abs_eigen(const Sym2& m, int dim) {
    if (dim == 1) return std::abs(m.xx);
    const double tr = m.xx + m.yy;
    const double det = m.xx * m.yy - m.xy * m.xy;
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    return std::max(std::abs(0.5 * tr - disc), std::abs(0.5 * tr + disc));
}

}  // namespace

double gradient_energy(const GridFunction& u, const MetricField& metric, double t) {
    const auto& grid = u.g();
    const int dim = grid.dim();
    double s = 0.0;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        const auto d = cell_gradient(grid, u.values(), c);
        s += grid.gamma_cell(c) * cell_quadratic(metric(t, grid.cell_center(c)), d, dim);
    }
    return s * grid.cell_volume();
}

double energy(const StateVector& state, const MetricField& metric) {
    const auto& grid = state.u.g();
    double s = 0.0;
    for (std::size_t n = 0; n < grid.size(); ++n) {
        s += grid.gamma(n) * (state.ut[n] * state.ut[n] + state.u[n] * state.u[n]);
    }
    return s * grid.cell_volume() + gradient_energy(state.u, metric, state.time);
}

double hk_norm(const GridFunction& f, int k) {
    if (k < 0 || k > 2) throw WavelabError("hk_norm: k must be 0, 1 or 2");
    const auto& grid = f.g();
    const double vol = grid.cell_volume();
    double s = 0.0;
    for (std::size_t n = 0; n < grid.size(); ++n) s += grid.gamma(n) * f[n] * f[n];
    s *= vol;
    if (k >= 1) {
        double g = 0.0;
        for (std::size_t c = 0; c < grid.size(); ++c) {
            const auto d = cell_gradient(grid, f.values(), c);
            g += grid.gamma_cell(c) * (d[0] * d[0] + d[1] * d[1]);
        }
        s += g * vol;
    }
    if (k >= 2) {
        double h = 0.0;
        for (std::size_t n = 0; n < grid.size(); ++n) {
            double q = 0.0;
            for (int a = 0; a < grid.dim(); ++a) {
                const double ha = grid.spacing(a);
                const double d = (f[grid.shift(n, a, 1)] - 2.0 * f[n] + f[grid.shift(n, a, -1)]) / (ha * ha);
                q += d * d;
            }
            if (grid.dim() == 2) {
                const std::size_t p = grid.shift(n, 0, 1), m = grid.shift(n, 0, -1);
                const double d01 = (f[grid.shift(p, 1, 1)] - f[grid.shift(p, 1, -1)] -
                                    f[grid.shift(m, 1, 1)] + f[grid.shift(m, 1, -1)]) /
                                   (4.0 * grid.spacing(0) * grid.spacing(1));
                q += 2.0 * d01 * d01;
            }
            h += grid.gamma(n) * q;
        }
        s += h * vol;
    }
    return std::sqrt(s);
}

double sigma_h1_norm(const GridFunction& psi, const CharacteristicSurface& surface,
                     const MetricField& metric) {
    const auto& grid = psi.g();
    const double vol = grid.cell_volume();
    double s = 0.0;
    for (std::size_t n = 0; n < grid.size(); ++n) s += grid.gamma(n) * psi[n] * psi[n];
    double g = 0.0;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        const auto d = cell_gradient(grid, psi.values(), c);
        const Sym2 m = metric(phi_at_cell(surface, c), grid.cell_center(c));
        g += grid.gamma_cell(c) * cell_quadratic(m, d, grid.dim());
    }
    return std::sqrt((s + g) * vol);
}

double sigma_l2_dnu0(const GridFunction& psi, const CharacteristicSurface& surface,
                     const MetricField& metric, double tol) {
    const GridFunction density = dnu0_density(surface, metric, tol);
    const auto& grid = psi.g();
    double s = 0.0;
    for (std::size_t n = 0; n < grid.size(); ++n) {
        if (density[n] < -tol) throw WavelabError("sigma_l2_dnu0: negative density (timelike node)");
        s += grid.gamma(n) * std::max(0.0, density[n]) * psi[n] * psi[n];
    }
    return std::sqrt(s * grid.cell_volume());
}

double energy_phi(const StateVector& state, const CharacteristicSurface& surface,
                  const MetricField& metric, double t) {
    const auto& grid = state.u.g();
    const double vol = grid.cell_volume();
    double s = 0.0;
    for (std::size_t n = 0; n < grid.size(); ++n) {
        if (surface.phi[n] > t) continue;
        s += grid.gamma(n) * (state.ut[n] * state.ut[n] + state.u[n] * state.u[n]);
    }
    for (std::size_t c = 0; c < grid.size(); ++c) {
        if (phi_at_cell(surface, c) > t) continue;
        const auto d = cell_gradient(grid, state.u.values(), c);
        s += grid.gamma_cell(c) * cell_quadratic(metric(state.time, grid.cell_center(c)), d, grid.dim());
    }
    return s * vol;
}

K1Terms k1_terms(const MetricField& metric, const FirstOrderOperator& op, const PeriodicGrid& grid,
                 double T, int sample_times) {
    if (!(T > 0.0)) throw WavelabError("k1_bound: T must be positive");
    return k1_terms(metric, op, grid, TimeWindow{-T, T}, sample_times);
}

K1Terms k1_terms(const MetricField& metric, const FirstOrderOperator& op, const PeriodicGrid& grid,
                 TimeWindow w, int sample_times) {
    if (!metric.window().contains(w.t_min) || !metric.window().contains(w.t_max)) {
        throw WavelabError("k1_bound: metric window does not cover the requested interval");
    }
    sample_times = std::max(sample_times, 2);
    const int dim = grid.dim();
    K1Terms k;
    k.lower_eigen = validate_ellipticity(metric, grid, w, metric.static_in_time() ? 2 : sample_times).lower;

    const int metric_samples = metric.static_in_time() ? 1 : sample_times;
    for (int j = 0; j < metric_samples; ++j) {
        const double t = metric_samples == 1 ? w.t_min : w.t_min + w.length() * j / (metric_samples - 1);
        if (!metric.static_in_time()) {
            const double dt = 1e-6;
            const double tp = std::min(t + dt, metric.window().t_max);
            const double tm = std::max(t - dt, metric.window().t_min);
            for (std::size_t c = 0; c < grid.size(); ++c) {
                const Point x = grid.cell_center(c);
                const Sym2 gp = metric(tp, x), gm = metric(tm, x);
                const Sym2 d{(gp.xx - gm.xx) / (tp - tm), (gp.xy - gm.xy) / (tp - tm),
                             (gp.yy - gm.yy) / (tp - tm)};
                k.dt_metric = std::max(k.dt_metric, max_abs_eigen(d, dim));
            }
        }
        const auto g = metric.sample_nodes(grid, t);
        for (std::size_t n = 0; n < grid.size(); ++n) {
            std::array<double, 2> v{0.0, 0.0};
            for (int beta = 0; beta < dim; ++beta) {
                for (int a = 0; a < dim; ++a) {
                    const std::size_t p = grid.shift(n, a, 1), m = grid.shift(n, a, -1);
                    v[static_cast<std::size_t>(beta)] +=
                        (grid.gamma(p) * g[p](a, beta) - grid.gamma(m) * g[m](a, beta)) /
                        (2.0 * grid.spacing(a));
                }
            }
            k.div_metric = std::max(k.div_metric, std::hypot(v[0], v[1]) / grid.gamma(n));
        }
    }
    const auto sup = op.sup_norms(grid, w, sample_times);
    k.b0 = sup.b0;
    k.b = sup.b;
    k.c = sup.c;
    const double kappa = std::max(1.0, 1.0 / k.lower_eigen);
    k.total = kappa * k.dt_metric + 2.0 * kappa * k.div_metric + 2.0 * (k.b0 + kappa * k.b + k.c) + 1.0;
    return k;
}

double k1_bound(const MetricField& metric, const FirstOrderOperator& op, const PeriodicGrid& grid,
                double T, int sample_times) {
    return k1_terms(metric, op, grid, T, sample_times).total;
}

std::vector<double> EnergyReport::margins() const {
    std::vector<double> m(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        m[i] = bound_curve[i] > 0.0 ? (bound_curve[i] - energies[i]) / bound_curve[i]
                                    : (energies[i] == 0.0 ? 0.0 : -1.0);
    }
    return m;
}

void write_energy_csv(std::ostream& os, const EnergyReport& r) {
    const auto m = r.margins();
    os << "# wavelab energy v1 k1=" << std::setprecision(17) << r.k1 << "\n";
    os << "t,energy,bound,margin\n";
    for (std::size_t i = 0; i < r.times.size(); ++i) {
        os << r.times[i] << ',' << r.energies[i] << ',' << r.bound_curve[i] << ',' << m[i] << '\n';
    }
}

}  // namespace wavelab
