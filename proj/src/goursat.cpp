#include "wavelab/goursat.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <tuple>

#include "wavelab/mollify.hpp"
#include "wavelab/norms.hpp"

namespace wavelab {

namespace {

void check_range(const Trajectory& traj, const CharacteristicSurface& surface, double shift = 0.0) {
    if (traj.states.empty()) throw WavelabError("trace: empty trajectory");
    const TimeWindow w = traj.window();
    const double lo = surface.phi.min() + shift, hi = surface.phi.max() + shift;
    if (!w.contains(lo, 1e-12) || !w.contains(hi, 1e-12)) {
        std::ostringstream msg;
        msg << "trace: surface range [" << lo << ", " << hi << "] leaves the trajectory window ["
            << w.t_min << ", " << w.t_max << "]";
        throw WavelabError(msg.str());
    }
}

double clamp_to(const TimeWindow& w, double t) { return std::clamp(t, w.t_min, w.t_max); }

/// Node-wise (u, d_s u) at s0 from a flattened trajectory, filtered in s with
/// the kernel C (1 - r^2)^4 of half-width `width`. Starting from d_s u = 0
/// excites a fast mode whose d_s u amplitude does not shrink as lambda -> 1;
/// the filter removes it at O(width^2) cost to the slow part.
std::pair<double, double> filtered_node(const Trajectory& flat, std::size_t n, double s0,
                                        double width) {
    if (width <= 0.0) return {flat.interpolate_node(n, s0), flat.interpolate_node_rate(n, s0)};
    constexpr int points = 400;
    double mass = 0.0, u = 0.0, ut = 0.0;
    for (int i = 0; i < points; ++i) {
        const double r = -1.0 + (i + 0.5) * 2.0 / points;
        const double q = 1.0 - r * r;
        const double w = q * q * q * q;
        const double dw = -8.0 * r * q * q * q / width;
        const double val = flat.interpolate_node(n, s0 + width * r);
        mass += w;
        u += w * val;
        ut -= dw * val;
    }
    return {u / mass, ut / mass};
}

double filter_width(double lambda, double S) { return std::min(0.5 * std::sqrt(1.0 - lambda), 0.25 * S); }

}  // namespace

GridFunction trace_on_surface(const Trajectory& traj, const CharacteristicSurface& surface) {
    check_range(traj, surface);
    const TimeWindow w = traj.window();
    GridFunction psi(surface.phi.grid(), 0.0);
    for (std::size_t n = 0; n < psi.size(); ++n) psi[n] = traj.interpolate_node(n, clamp_to(w, surface.phi[n]));
    return psi;
}

GridFunction trace_rate_on_surface(const Trajectory& traj, const CharacteristicSurface& surface) {
    check_range(traj, surface);
    const TimeWindow w = traj.window();
    GridFunction psi(surface.phi.grid(), 0.0);
    for (std::size_t n = 0; n < psi.size(); ++n) {
        psi[n] = traj.interpolate_node_rate(n, clamp_to(w, surface.phi[n]));
    }
    return psi;
}

std::vector<double> default_lambda_schedule() {
    std::vector<double> s;
    for (int k = 2; k <= 8; ++k) s.push_back(1.0 - std::ldexp(1.0, -k));
    return s;
}

RoundTrip roundtrip_error(const GridFunction& v, const GridFunction& trace,
                          const CharacteristicSurface& surface, const MetricField& metric) {
    const GridFunction e = trace - v;
    RoundTrip r;
    r.l2 = hk_norm(e, 0);
    r.h1 = sigma_h1_norm(e, surface, metric);
    if (v.max_abs() == 0.0) {
        r.relative = false;
        return r;
    }
    r.l2 /= hk_norm(v, 0);
    r.h1 /= sigma_h1_norm(v, surface, metric);
    return r;
}

RoundTrip roundtrip_error(const GridFunction& v, const GoursatResult& result,
                          const CharacteristicSurface& surface, const MetricField& metric) {
    return roundtrip_error(v, trace_on_surface(result.trajectory, surface), surface, metric);
}

GoursatResult solve_goursat(const GridFunction& v, const CharacteristicSurface& surface,
                            const MetricField& metric, const FirstOrderOperator& op,
                            const GoursatConfig& config) {
    if (!v.all_finite()) throw WavelabError("solve_goursat: data must be finite");
    if (v.size() != surface.phi.size()) throw WavelabError("solve_goursat: data and surface grids differ");
    const auto& sched = config.lambda_schedule;
    if (sched.empty()) throw WavelabError("solve_goursat: empty lambda schedule");
    for (std::size_t i = 0; i < sched.size(); ++i) {
        if (!(sched[i] > 0.0 && sched[i] < 1.0)) throw WavelabError("solve_goursat: lambda must lie in (0, 1)");
        if (i > 0 && !(sched[i] > sched[i - 1])) {
            throw WavelabError("solve_goursat: lambda schedule must be strictly increasing");
        }
    }
    const CausalType type = classify(surface, metric);
    if (type == CausalType::timelike_invalid) throw WavelabError("solve_goursat: surface is timelike");

    GoursatResult result;
    MetricField g = metric;
    FirstOrderOperator l1 = op;
    const auto& grid = v.g();
    if (config.regularize_rough && metric.regularity() == Regularity::lipschitz) {
        result.mollifier_level = grid_tied_level(grid);
        auto reg = regularize_coefficients(metric, op, grid, result.mollifier_level);
        g = std::move(reg.metric);
        l1 = std::move(reg.op);
    }

    const double phi_min = surface.phi.min(), phi_max = surface.phi.max();
    const double S = phi_max - phi_min;
    const double v_norm = sigma_h1_norm(v, surface, g);
    GridFunction previous;

    for (double lambda : sched) {
        const TransformedProblem problem = flatten(g, l1, surface, lambda);
        StateVector flat_data{v, GridFunction(v.grid(), 0.0), 0.0};
        flat_data.u.set_time_tag(0.0);
        StateVector cauchy{GridFunction(v.grid(), 0.0), GridFunction(v.grid(), 0.0), phi_max};
        long steps = 0;
        if (S > 0.0) {
            const double width = filter_width(lambda, S);
            SolverConfig fc = config.solver;
            fc.window = TimeWindow{-width, S + width};
            fc.max_stored = std::max(config.max_stored, static_cast<int>(std::ceil(64.0 * S / width)));
            const double dt = max_stable_dt(problem, fc.window, fc.cfl_fraction);
            steps = static_cast<long>(std::ceil(fc.window.length() / dt));
            if (steps > config.max_steps) {
                result.warning = true;
                std::ostringstream msg;
                msg << "lambda = " << lambda << " needs " << steps << " steps (budget "
                    << config.max_steps << "); schedule stopped";
                result.warning_message = msg.str();
                break;
            }
            const Trajectory flat = solve_flattened(flat_data, fc, problem);
            if (flat.aborted) {
                result.warning = true;
                result.warning_message = "flattened solve aborted: " + flat.diagnostic;
                break;
            }
            for (std::size_t n = 0; n < v.size(); ++n) {
                const double s = std::clamp(phi_max - surface.phi[n], 0.0, S);
                std::tie(cauchy.u[n], cauchy.ut[n]) = filtered_node(flat, n, s, width);
            }
        } else {
            cauchy.u = v;
        }
        cauchy.u.set_time_tag(phi_max);
        cauchy.ut.set_time_tag(phi_max);

        SolverConfig oc = config.solver;
        oc.window = TimeWindow{phi_min, phi_max};
        if (oc.scheme == TimeScheme::leapfrog && !l1.b0.is_zero()) oc.scheme = TimeScheme::ssp_rk3;
        Trajectory original = solve_cauchy(cauchy, oc, g, l1);
        if (original.aborted) {
            result.warning = true;
            result.warning_message = "original-equation solve aborted: " + original.diagnostic;
            break;
        }
        const GridFunction trace = trace_on_surface(original, surface);
        const RoundTrip rt = roundtrip_error(v, trace, surface, g);

        result.lambda_schedule.push_back(lambda);
        result.stage_roundtrip_l2.push_back(rt.l2);
        result.stage_roundtrip_h1.push_back(rt.h1);
        result.stage_steps.push_back(steps);
        result.roundtrip_l2 = rt.l2;
        result.roundtrip_h1 = rt.h1;
        result.relative = rt.relative;
        result.trajectory = std::move(original);
        result.cauchy_data = cauchy;
        bool stop = false;
        if (previous.size() > 0) {
            const double gap = sigma_h1_norm(trace - previous, surface, g);
            result.successive_h1_gaps.push_back(gap);
            stop = gap <= config.gap_tolerance * v_norm;
        }
        previous = trace;
        if (stop) break;
    }
    if (result.lambda_schedule.empty()) {
        throw WavelabError("solve_goursat: no stage completed: " + result.warning_message);
    }
    return result;
}

GridFunction random_band_limited(const GridPtr& grid, std::uint64_t seed, int max_mode) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int dim = grid->dim();
    GridFunction f(grid, 0.0);
    const int m1max = dim > 1 ? max_mode : 0;
    for (int m0 = 0; m0 <= max_mode; ++m0) {
        for (int m1 = dim > 1 ? -m1max : 0; m1 <= m1max; ++m1) {
            if (m0 == 0 && m1 < 0) continue;
            const double scale = 1.0 / (1.0 + std::hypot(m0, m1));
            const double a = normal(rng) * scale, b = normal(rng) * scale;
            for (std::size_t n = 0; n < f.size(); ++n) {
                const Point x = grid->node_position(n);
                double arg = 2.0 * std::numbers::pi * m0 * x[0] / grid->circumference(0);
                if (dim > 1) arg += 2.0 * std::numbers::pi * m1 * x[1] / grid->circumference(1);
                f[n] += a * std::cos(arg) + (m0 == 0 && m1 == 0 ? 0.0 : b * std::sin(arg));
            }
        }
    }
    return f;
}

TraceConstants estimate_trace_constants(const MetricField& metric, const FirstOrderOperator& op,
                                        const CharacteristicSurface& surface, double T,
                                        int ensemble_size, std::uint64_t seed,
                                        const SolverConfig& solver) {
    const double reach = std::max(std::abs(surface.phi.min()), std::abs(surface.phi.max()));
    if (!(T > reach)) throw WavelabError("estimate_trace_constants: T must exceed max |phi|");
    if (ensemble_size < 8) throw WavelabError("estimate_trace_constants: ensemble_size must be >= 8");
    const GridPtr& grid = surface.phi.grid();
    TraceConstants out;
    out.k3 = 0.0;
    out.max_violation = 1.0;
    std::mt19937_64 seeder(seed);
    SolverConfig cfg = solver;
    cfg.window = TimeWindow{-T, T};
    for (int i = 0; i < ensemble_size; ++i) {
        const std::uint64_t s0 = seeder(), s1 = seeder();
        StateVector data{random_band_limited(grid, s0), random_band_limited(grid, s1), 0.0};
        const Trajectory traj = solve_cauchy(data, cfg, metric, op);
        if (traj.aborted) throw WavelabError("estimate_trace_constants: solve aborted: " + traj.diagnostic);
        const GridFunction psi = trace_on_surface(traj, surface);
        const GridFunction rate = trace_rate_on_surface(traj, surface);
        const double h1 = sigma_h1_norm(psi, surface, metric);
        const double w0 = sigma_l2_dnu0(rate, surface, metric);
        const double trace_norm = std::sqrt(h1 * h1 + w0 * w0);
        double sup_e = 0.0;
        for (const auto& st : traj.states) sup_e = std::max(sup_e, energy(st, metric));
        const double ratio = trace_norm / std::sqrt(sup_e);
        out.ratios.push_back(ratio);
        out.k2 = std::max(out.k2, ratio);
        out.k3 = std::max(out.k3, 1.0 / ratio);
        const EnergyReport rep = energy_monitor(traj, metric, op);
        out.k1 = rep.k1;
        out.max_violation = std::min(out.max_violation, rep.max_violation);
    }
    return out;
}

std::vector<ContinuityRow> foliation_continuity(const Trajectory& traj,
                                                const CharacteristicSurface& surface,
                                                const std::vector<double>& times) {
    for (double t : times) check_range(traj, surface, t);
    const TimeWindow w = traj.window();
    auto slice = [&](double t) {
        GridFunction v(surface.phi.grid(), 0.0);
        for (std::size_t n = 0; n < v.size(); ++n) v[n] = traj.interpolate_node(n, clamp_to(w, t + surface.phi[n]));
        return v;
    };
    std::vector<ContinuityRow> rows;
    if (times.size() < 2) return rows;
    GridFunction prev = slice(times.front());
    for (std::size_t i = 1; i < times.size(); ++i) {
        GridFunction cur = slice(times[i]);
        const double dt = std::abs(times[i] - times[i - 1]);
        rows.push_back({times[i - 1], times[i], dt > 0.0 ? hk_norm(cur - prev, 1) / dt : 0.0});
        prev = std::move(cur);
    }
    return rows;
}

}  // namespace wavelab
