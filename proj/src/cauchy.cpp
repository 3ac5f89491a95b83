#include "wavelab/cauchy.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace wavelab {

std::string to_string(TimeScheme s) {
    switch (s) {
        case TimeScheme::leapfrog: return "leapfrog";
        case TimeScheme::rk2_system: return "rk2_system";
        case TimeScheme::ssp_rk3: return "ssp_rk3";
        case TimeScheme::rk4: return "rk4";
    }
    return "unknown";
}

TimeScheme parse_scheme(const std::string& name) {
    if (name == "leapfrog") return TimeScheme::leapfrog;
    if (name == "rk2_system" || name == "rk2") return TimeScheme::rk2_system;
    if (name == "ssp_rk3" || name == "rk3") return TimeScheme::ssp_rk3;
    if (name == "rk4") return TimeScheme::rk4;
    throw WavelabError("unknown time scheme: " + name);
}

// ---------------------------------------------------------------- Trajectory

std::size_t Trajectory::bracket(double t) const {
    if (states.empty()) throw WavelabError("interpolate: empty trajectory");
    const double slack = 1e-12 * std::max(1.0, std::abs(t));
    if (t < states.front().time - slack || t > states.back().time + slack) {
        std::ostringstream msg;
        msg << "interpolate: t = " << t << " outside stored range [" << states.front().time << ", "
            << states.back().time << "]";
        throw WavelabError(msg.str());
    }
    if (states.size() == 1) return 0;
    auto it = std::upper_bound(states.begin(), states.end(), t,
                               [](double v, const StateVector& s) { return v < s.time; });
    std::size_t i = it == states.begin() ? 0 : static_cast<std::size_t>(it - states.begin()) - 1;
    return std::min(i, states.size() - 2);
}

namespace {

struct Hermite {
    double h00, h10, h01, h11;
};

Hermite hermite(double tau, double delta) {
    const double t2 = tau * tau, t3 = t2 * tau;
    return {2.0 * t3 - 3.0 * t2 + 1.0, (t3 - 2.0 * t2 + tau) * delta, -2.0 * t3 + 3.0 * t2,
            (t3 - t2) * delta};
}

Hermite hermite_rate(double tau, double delta) {
    const double t2 = tau * tau;
    return {(6.0 * t2 - 6.0 * tau) / delta, 3.0 * t2 - 4.0 * tau + 1.0, (6.0 * tau - 6.0 * t2) / delta,
            3.0 * t2 - 2.0 * tau};
}

}  // namespace

StateVector Trajectory::interpolate(double t) const {
    const std::size_t i = bracket(t);
    if (states.size() == 1) return states.front();
    const StateVector& a = states[i];
    const StateVector& b = states[i + 1];
    const double delta = b.time - a.time;
    const double tau = (t - a.time) / delta;
    const Hermite w = hermite(tau, delta);
    const Hermite r = hermite_rate(tau, delta);
    StateVector out{GridFunction(a.u.grid(), 0.0), GridFunction(a.u.grid(), 0.0), t};
    for (std::size_t n = 0; n < a.u.size(); ++n) {
        out.u[n] = w.h00 * a.u[n] + w.h10 * a.ut[n] + w.h01 * b.u[n] + w.h11 * b.ut[n];
        out.ut[n] = r.h00 * a.u[n] + r.h10 * a.ut[n] + r.h01 * b.u[n] + r.h11 * b.ut[n];
    }
    out.u.set_time_tag(t);
    out.ut.set_time_tag(t);
    return out;
}

double Trajectory::interpolate_node(std::size_t node, double t) const {
    const std::size_t i = bracket(t);
    if (states.size() == 1) return states.front().u[node];
    const StateVector& a = states[i];
    const StateVector& b = states[i + 1];
    const double delta = b.time - a.time;
    const Hermite w = hermite((t - a.time) / delta, delta);
    return w.h00 * a.u[node] + w.h10 * a.ut[node] + w.h01 * b.u[node] + w.h11 * b.ut[node];
}

double Trajectory::interpolate_node_rate(std::size_t node, double t) const {
    const std::size_t i = bracket(t);
    if (states.size() == 1) return states.front().ut[node];
    const StateVector& a = states[i];
    const StateVector& b = states[i + 1];
    const double delta = b.time - a.time;
    const Hermite r = hermite_rate((t - a.time) / delta, delta);
    return r.h00 * a.u[node] + r.h10 * a.ut[node] + r.h01 * b.u[node] + r.h11 * b.ut[node];
}

// ---------------------------------------------------------------- step sizes


double max_stable_dt(const MetricField& metric, const PeriodicGrid& grid, TimeWindow window,
                     double cfl_fraction) {
    if (!(cfl_fraction > 0.0) || cfl_fraction > 1.0) {
        throw WavelabError("cfl_fraction must lie in (0, 1]");
    }
    const Envelope env = validate_ellipticity(metric, grid, window, metric.static_in_time() ? 2 : 17);
    return cfl_fraction * grid.min_spacing() / std::sqrt(grid.dim() * env.upper);
}

double max_stable_dt(const TransformedProblem& problem, TimeWindow s_window, double cfl_fraction) {
    if (!(cfl_fraction > 0.0) || cfl_fraction > 1.0) {
        throw WavelabError("cfl_fraction must lie in (0, 1]");
    }
    const auto& grid = problem.surface().grid();
    const auto& phi = problem.surface().phi;
    const TimeWindow t_window{s_window.t_min + phi.min(), s_window.t_max + phi.max()};
    const Envelope env = validate_ellipticity(problem.metric(), grid, t_window,
                                              problem.metric().static_in_time() ? 2 : 17);
    const double G = problem.lambda() * env.upper;
    const int samples = problem.metric().static_in_time() ? 1 : 17;
    std::vector<double> a(grid.size()), c0(grid.size()), c1(grid.size(), 0.0);
    double factor = std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k) {
        const double s = samples > 1 ? s_window.t_min + s_window.length() * k / (samples - 1)
                                     : s_window.t_min;
        problem.fill_cell_coefficients(s, a, c0, c1);
        double cmax = 0.0;
        for (std::size_t c = 0; c < grid.size(); ++c) cmax = std::max(cmax, std::hypot(c0[c], c1[c]));
        for (std::size_t n = 0; n < grid.size(); ++n) {
            if (!(a[n] > 0.0)) throw WavelabError("max_stable_dt: d_s^2 coefficient is not positive");
            factor = std::min(factor, 2.0 * a[n] / (cmax + std::sqrt(cmax * cmax + 4.0 * a[n] * G)));
        }
    }
    return cfl_fraction * grid.min_spacing() * factor / std::sqrt(static_cast<double>(grid.dim()));
}

// ---------------------------------------------------------------- solver core

namespace {

using Vec = std::vector<double>;
using Rhs = std::function<void(double, const Vec&, Vec&)>;

/// One explicit Runge-Kutta step of y' = F(s, y).
class RungeKutta {
public:
    RungeKutta(TimeScheme scheme, std::size_t n) : scheme_(scheme), k_(n), y1_(n), y2_(n) {}

    void step(const Rhs& f, double s, double dt, Vec& y) {
        const std::size_t n = y.size();
        if (scheme_ == TimeScheme::rk4) {
            step_rk4(f, s, dt, y);
            return;
        }
        f(s, y, k_);
        for (std::size_t i = 0; i < n; ++i) y1_[i] = y[i] + dt * k_[i];
        f(s + dt, y1_, k_);
        if (scheme_ == TimeScheme::rk2_system) {
            for (std::size_t i = 0; i < n; ++i) y[i] = 0.5 * y[i] + 0.5 * (y1_[i] + dt * k_[i]);
            return;
        }
        for (std::size_t i = 0; i < n; ++i) y2_[i] = 0.75 * y[i] + 0.25 * (y1_[i] + dt * k_[i]);
        f(s + 0.5 * dt, y2_, k_);
        for (std::size_t i = 0; i < n; ++i) y[i] = y[i] / 3.0 + 2.0 / 3.0 * (y2_[i] + dt * k_[i]);
    }

private:
    void step_rk4(const Rhs& f, double s, double dt, Vec& y) {
        const std::size_t n = y.size();
        if (acc_.size() != n) acc_.resize(n);
        f(s, y, k_);
        for (std::size_t i = 0; i < n; ++i) {
            acc_[i] = k_[i];
            y1_[i] = y[i] + 0.5 * dt * k_[i];
        }
        f(s + 0.5 * dt, y1_, k_);
        for (std::size_t i = 0; i < n; ++i) {
            acc_[i] += 2.0 * k_[i];
            y1_[i] = y[i] + 0.5 * dt * k_[i];
        }
        f(s + 0.5 * dt, y1_, k_);
        for (std::size_t i = 0; i < n; ++i) {
            acc_[i] += 2.0 * k_[i];
            y1_[i] = y[i] + dt * k_[i];
        }
        f(s + dt, y1_, k_);
        for (std::size_t i = 0; i < n; ++i) y[i] += dt / 6.0 * (acc_[i] + k_[i]);
    }

    TimeScheme scheme_;
    Vec k_, y1_, y2_, acc_;
};

/// Semi-discrete wave system on y = [u, P], P = a d_s u + c^a d_a u, covering
/// both the original problem (a = 1, c = 0) and flattened ones.
class WaveSystem {
public:
    WaveSystem(GridPtr grid, const MetricField& metric, const FirstOrderOperator& op, Source source,
               const TransformedProblem* flat)
        : grid_(std::move(grid)), metric_(metric), op_(op), source_(std::move(source)), flat_(flat) {
        const std::size_t n = grid_->size();
        dim_ = grid_->dim();
        M_.resize(n);
        a_.assign(n, 1.0);
        c_[0].assign(n, 0.0);
        c_[1].assign(n, 0.0);
        p0_.assign(n, 0.0);
        p_[0].assign(n, 0.0);
        p_[1].assign(n, 0.0);
        q_.assign(n, 0.0);
        f_.assign(n, 0.0);
        d0_[0].assign(n, 0.0);
        d0_[1].assign(n, 0.0);
        us_.assign(n, 0.0);
        div_.assign(n, 0.0);
        tmp_.assign(n, 0.0);
        cross_.assign(n, 0.0);
        lambda_ = flat_ ? flat_->lambda() : 1.0;
        has_first_order_ = !op_.is_zero();
    }

    std::size_t nodes() const { return grid_->size(); }
    bool has_source() const { return static_cast<bool>(source_); }
    const GridPtr& grid() const { return grid_; }
    double source_norm() const {
        double s = 0.0;
        for (std::size_t n = 0; n < f_.size(); ++n) s += grid_->gamma(n) * f_[n] * f_[n];
        return std::sqrt(s * grid_->cell_volume());
    }

    double node_time(std::size_t n, double s) const { return flat_ ? s + flat_->surface().phi[n] : s; }

    void coefficients(double s) {
        const auto& grid = *grid_;
        const std::size_t n = grid.size();
        if (!cached_ || !metric_.static_in_time()) {
            for (std::size_t c = 0; c < n; ++c) {
                const double tc = flat_ ? s + flat_->phi_cells()[c] : s;
                const Sym2 g = metric_(tc, grid.cell_center(c));
                const double w = grid.gamma_cell(c) * lambda_;
                M_[c] = Sym2{w * g.xx, w * g.xy, w * g.yy};
            }
            if (flat_) flat_->fill_cell_coefficients(s, a_, c_[0], c_[1]);
            cached_ = true;
        }
        if (has_first_order_) {
            for (std::size_t i = 0; i < n; ++i) {
                const double t = node_time(i, s);
                const Point x = grid.node_position(i);
                const double b0 = op_.b0(t, x);
                p_[0][i] = op_.b[0](t, x);
                p_[1][i] = dim_ > 1 ? op_.b[1](t, x) : 0.0;
                p0_[i] = b0;
                if (flat_) {
                    const auto& grad = flat_->surface().grad;
                    p0_[i] -= p_[0][i] * grad[0][i];
                    if (dim_ > 1) p0_[i] -= p_[1][i] * grad[1][i];
                }
                q_[i] = op_.c(t, x);
            }
        }
        if (source_) {
            for (std::size_t i = 0; i < n; ++i) f_[i] = source_(node_time(i, s), grid.node_position(i));
        }
    }

    /// d_s u from (u, P) at the current coefficients; fills d0_ and us_.
    void rate(const double* u, const double* P) {
        const auto& grid = *grid_;
        const std::size_t n = grid.size();
        for (int a = 0; a < dim_; ++a) {
            const double inv = 1.0 / (2.0 * grid.spacing(a));
            auto& d = d0_[static_cast<std::size_t>(a)];
            for (std::size_t i = 0; i < n; ++i) d[i] = (u[grid.shift(i, a, 1)] - u[grid.shift(i, a, -1)]) * inv;
        }
        if (!flat_) {
            std::copy(P, P + n, us_.begin());
            return;
        }
        cross_average(u, cross_.data());
        for (std::size_t i = 0; i < n; ++i) us_[i] = (P[i] - cross_[i]) / a_[i];
    }

    /// (B u)_i: c . grad u formed at the cells touching node i and averaged
    /// onto the node with the density weights.
    void cross_average(const double* u, double* out) const {
        const auto& grid = *grid_;
        const std::size_t n = grid.size();
        const double share = dim_ == 1 ? 0.5 : 0.25;
        std::fill(out, out + n, 0.0);
        const std::span<const double> uu(u, n);
        for (std::size_t c = 0; c < n; ++c) {
            const auto g = cell_gradient(grid, uu, c);
            double v = c_[0][c] * g[0];
            if (dim_ > 1) v += c_[1][c] * g[1];
            v *= share * grid.gamma_cell(c);
            const std::size_t n10 = grid.shift(c, 0, 1);
            out[c] += v;
            out[n10] += v;
            if (dim_ > 1) {
                out[grid.shift(c, 1, 1)] += v;
                out[grid.shift(n10, 1, 1)] += v;
            }
        }
        for (std::size_t i = 0; i < n; ++i) out[i] /= grid.gamma(i);
    }

    /// Adjoint of cross_average applied to the rate w: gamma^{-1} sum over
    /// cells of gamma c w_avg d(grad u)/du_i, i.e. -gamma^{-1} div(gamma c w).
    void cross_adjoint(const double* w, double* out) const {
        const auto& grid = *grid_;
        const std::size_t n = grid.size();
        std::fill(out, out + n, 0.0);
        if (dim_ == 1) {
            const double inv = 1.0 / grid.spacing(0);
            for (std::size_t c = 0; c < n; ++c) {
                const std::size_t n1 = grid.shift(c, 0, 1);
                const double f = grid.gamma_cell(c) * c_[0][c] * 0.5 * (w[c] + w[n1]) * inv;
                out[c] -= f;
                out[n1] += f;
            }
        } else {
            const double i0 = 0.5 / grid.spacing(0), i1 = 0.5 / grid.spacing(1);
            for (std::size_t c = 0; c < n; ++c) {
                const std::size_t n10 = grid.shift(c, 0, 1), n01 = grid.shift(c, 1, 1);
                const std::size_t n11 = grid.shift(n10, 1, 1);
                const double wbar = 0.25 * (w[c] + w[n10] + w[n01] + w[n11]) * grid.gamma_cell(c);
                const double f0 = c_[0][c] * wbar * i0, f1 = c_[1][c] * wbar * i1;
                out[c] += -f0 - f1;
                out[n10] += f0 - f1;
                out[n01] += -f0 + f1;
                out[n11] += f0 + f1;
            }
        }
        for (std::size_t i = 0; i < n; ++i) out[i] /= grid.gamma(i);
    }

    void rhs(double s, const Vec& y, Vec& dy) {
        const auto& grid = *grid_;
        const std::size_t n = grid.size();
        coefficients(s);
        const double* u = y.data();
        const double* P = y.data() + n;
        rate(u, P);
        apply_flux_divergence(grid, M_, std::span<const double>(u, n), div_);
        double* du = dy.data();
        double* dP = dy.data() + n;
        for (std::size_t i = 0; i < n; ++i) {
            du[i] = us_[i];
            dP[i] = div_[i] + f_[i];
        }
        if (flat_) {
            cross_adjoint(us_.data(), tmp_.data());
            for (std::size_t i = 0; i < n; ++i) dP[i] += tmp_[i];
        }
        if (has_first_order_) {
            for (std::size_t i = 0; i < n; ++i) {
                double l = p0_[i] * us_[i] + p_[0][i] * d0_[0][i] + q_[i] * u[i];
                if (dim_ > 1) l += p_[1][i] * d0_[1][i];
                dP[i] -= l;
            }
        }
    }

    /// Acceleration for leapfrog (original problem without b0).
    void acceleration(double t, const Vec& u, Vec& out) {
        const std::size_t n = grid_->size();
        coefficients(t);
        rate(u.data(), u.data());
        apply_flux_divergence(*grid_, M_, u, out);
        for (std::size_t i = 0; i < n; ++i) {
            double l = has_first_order_ ? p_[0][i] * d0_[0][i] + q_[i] * u[i] : 0.0;
            if (has_first_order_ && dim_ > 1) l += p_[1][i] * d0_[1][i];
            out[i] += f_[i] - l;
        }
    }

    StateVector to_state(double s, const Vec& y) {
        const std::size_t n = grid_->size();
        coefficients(s);
        rate(y.data(), y.data() + n);
        StateVector st{GridFunction(grid_, Vec(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n)), s),
                       GridFunction(grid_, us_, s), s};
        return st;
    }

    Vec from_state(const StateVector& st) {
        const std::size_t n = grid_->size();
        Vec y(2 * n);
        std::copy(st.u.values().begin(), st.u.values().end(), y.begin());
        if (!flat_) {
            std::copy(st.ut.values().begin(), st.ut.values().end(), y.begin() + static_cast<std::ptrdiff_t>(n));
            return y;
        }
        coefficients(st.time);
        rate(y.data(), y.data() + n);
        for (std::size_t i = 0; i < n; ++i) y[n + i] = a_[i] * st.ut[i] + cross_[i];
        return y;
    }

private:
    GridPtr grid_;
    const MetricField& metric_;
    FirstOrderOperator op_;
    Source source_;
    const TransformedProblem* flat_;
    int dim_ = 1;
    double lambda_ = 1.0;
    bool cached_ = false;
    bool has_first_order_ = false;
    std::vector<Sym2> M_;
    Vec a_;
    std::array<Vec, 2> c_;
    Vec p0_;
    std::array<Vec, 2> p_;
    Vec q_, f_;
    std::array<Vec, 2> d0_;
    Vec us_, div_, tmp_, cross_;
};

/// Called with each stored state; returns a diagnostic to abort, or empty.
using Monitor = std::function<std::string(const StateVector&, double source_integral)>;

struct Leg {
    std::vector<StateVector> states;
    double dt = 0.0;
    bool aborted = false;
    std::string diagnostic;
};

int effective_store_every(const SolverConfig& cfg, long steps) {
    long every = std::max(1, cfg.store_every);
    if (cfg.max_stored > 0) every = std::max(every, (steps + cfg.max_stored - 1) / cfg.max_stored);
    return static_cast<int>(every);
}

long step_count(double length, double dt_max) {
    return std::max(1L, static_cast<long>(std::ceil(length / dt_max - 1e-9)));
}

bool finite(const Vec& y) {
    return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

Leg march_rk(WaveSystem& sys, const StateVector& data, double t_end, double dt_max,
             const SolverConfig& cfg, const Monitor& monitor) {
    Leg leg;
    const double length = std::abs(t_end - data.time);
    const long steps = step_count(length, dt_max);
    const double dt = (t_end - data.time) / static_cast<double>(steps);
    leg.dt = std::abs(dt);
    const int every = effective_store_every(cfg, steps);
    Vec y = sys.from_state(data);
    RungeKutta rk(cfg.scheme, y.size());
    const Rhs f = [&sys](double s, const Vec& yy, Vec& dy) { sys.rhs(s, yy, dy); };
    double source_integral = 0.0;
    for (long k = 0; k < steps; ++k) {
        const double s = data.time + static_cast<double>(k) * dt;
        const double s1 = k + 1 == steps ? t_end : data.time + static_cast<double>(k + 1) * dt;
        double f0 = 0.0;
        if (sys.has_source()) {
            sys.coefficients(s);
            f0 = sys.source_norm();
        }
        rk.step(f, s, dt, y);
        if (sys.has_source()) {
            sys.coefficients(s1);
            source_integral += 0.5 * std::abs(dt) * (f0 + sys.source_norm());
        }
        if (!finite(y)) {
            leg.aborted = true;
            leg.diagnostic = "non-finite values at t = " + std::to_string(s1);
            return leg;
        }
        if ((k + 1) % every == 0 || k + 1 == steps) {
            leg.states.push_back(sys.to_state(s1, y));
            if (monitor) {
                std::string why = monitor(leg.states.back(), source_integral);
                if (!why.empty()) {
                    leg.aborted = true;
                    leg.diagnostic = why;
                    return leg;
                }
            }
        }
    }
    return leg;
}

Leg march_leapfrog(WaveSystem& sys, const StateVector& data, double t_end, double dt_max,
                   const SolverConfig& cfg, const Monitor& monitor) {
    Leg leg;
    const std::size_t n = sys.nodes();
    const double length = std::abs(t_end - data.time);
    const long steps = step_count(length, dt_max);
    const double dt = (t_end - data.time) / static_cast<double>(steps);
    leg.dt = std::abs(dt);
    const int every = effective_store_every(cfg, steps);
    Vec prev(data.u.values().begin(), data.u.values().end());
    Vec acc(n), cur(n), next(n);
    sys.acceleration(data.time, prev, acc);
    for (std::size_t i = 0; i < n; ++i) cur[i] = prev[i] + dt * data.ut[i] + 0.5 * dt * dt * acc[i];
    double source_integral = 0.0;
    double f_prev = sys.source_norm();
    auto emit = [&](long k, const Vec& u, const Vec& ut) -> bool {
        const double t = k == steps ? t_end : data.time + static_cast<double>(k) * dt;
        leg.states.push_back(StateVector{GridFunction(sys.grid(), u, t), GridFunction(sys.grid(), ut, t), t});
        if (!monitor) return true;
        std::string why = monitor(leg.states.back(), source_integral);
        if (why.empty()) return true;
        leg.aborted = true;
        leg.diagnostic = why;
        return false;
    };
    Vec ut(n);
    for (long k = 1; k <= steps; ++k) {
        const double t = data.time + static_cast<double>(k) * dt;
        sys.acceleration(t, cur, acc);
        source_integral += 0.5 * std::abs(dt) * (f_prev + sys.source_norm());
        f_prev = sys.source_norm();
        for (std::size_t i = 0; i < n; ++i) next[i] = 2.0 * cur[i] - prev[i] + dt * dt * acc[i];
        if (!finite(next)) {
            leg.aborted = true;
            leg.diagnostic = "non-finite values at t = " + std::to_string(t);
            return leg;
        }
        if (k % every == 0 || k == steps) {
            if (k == steps) {
                for (std::size_t i = 0; i < n; ++i) ut[i] = (cur[i] - prev[i]) / dt + 0.5 * dt * acc[i];
            } else {
                for (std::size_t i = 0; i < n; ++i) ut[i] = (next[i] - prev[i]) / (2.0 * dt);
            }
            if (!emit(k, cur, ut)) return leg;
        }
        prev.swap(cur);
        cur.swap(next);
    }
    return leg;
}

Trajectory run(WaveSystem& sys, const StateVector& data, const SolverConfig& cfg, double dt_max,
               bool leapfrog, const Monitor& monitor) {
    if (!data.u.all_finite() || !data.ut.all_finite()) throw WavelabError("solve: non-finite data");
    if (!std::isfinite(data.time) || !cfg.window.contains(data.time)) {
        throw WavelabError("solve: data time outside the solver window");
    }
    Trajectory traj;
    traj.origin = data.time;
    auto march = [&](double t_end) {
        return leapfrog ? march_leapfrog(sys, data, t_end, dt_max, cfg, monitor)
                        : march_rk(sys, data, t_end, dt_max, cfg, monitor);
    };
    const double tiny = 1e-12 * std::max(1.0, std::abs(data.time));
    Leg back, fwd;
    if (cfg.window.t_min < data.time - tiny) back = march(cfg.window.t_min);
    if (!back.aborted && cfg.window.t_max > data.time + tiny) fwd = march(cfg.window.t_max);
    for (auto it = back.states.rbegin(); it != back.states.rend(); ++it) traj.states.push_back(std::move(*it));
    StateVector origin = data;
    origin.u.set_time_tag(data.time);
    origin.ut.set_time_tag(data.time);
    traj.states.push_back(origin);
    for (auto& s : fwd.states) traj.states.push_back(std::move(s));
    traj.dt = std::max(back.dt, fwd.dt);
    traj.aborted = back.aborted || fwd.aborted;
    traj.diagnostic = back.aborted ? back.diagnostic : fwd.diagnostic;
    return traj;
}

}  // namespace

Trajectory solve_cauchy(const StateVector& data, const SolverConfig& config, const MetricField& metric,
                        const FirstOrderOperator& op, const Source& source) {
    const GridPtr& grid = data.u.grid();
    if (!grid || data.ut.grid() != grid) throw WavelabError("solve_cauchy: u and ut on different grids");
    if (metric.dim() != grid->dim()) throw WavelabError("solve_cauchy: metric/grid dimension mismatch");
    if (!metric.window().contains(config.window.t_min) || !metric.window().contains(config.window.t_max)) {
        throw WavelabError("solve_cauchy: solver window exceeds the metric window");
    }
    const bool leapfrog = config.scheme == TimeScheme::leapfrog;
    if (leapfrog && !op.b0.is_zero()) {
        throw WavelabError("solve_cauchy: leapfrog requires b0 = 0");
    }
    const double dt_max = max_stable_dt(metric, *grid, config.window, config.cfl_fraction);
    const K1Terms k1 = k1_terms(metric, op, *grid, config.window, 17);
    const double e0 = energy(data, metric);
    const double t0 = data.time;
    Monitor monitor = [&](const StateVector& st, double fint) -> std::string {
        const double e = energy(st, metric);
        const double root = std::sqrt(e0) + fint;
        const double bound = std::exp(k1.total * std::abs(st.time - t0)) * root * root;
        if (e > 10.0 * bound && e > 1e-300) {
            std::ostringstream msg;
            msg << std::setprecision(6) << "instability: E(" << st.time << ") = " << e
                << " exceeds 10x the energy bound " << bound;
            return msg.str();
        }
        return {};
    };
    WaveSystem sys(grid, metric, op, source, nullptr);
    Trajectory traj = run(sys, data, config, dt_max, leapfrog, monitor);
    traj.metric = std::make_shared<const MetricField>(metric);
    traj.op = op;
    traj.source = source;
    return traj;
}

Trajectory solve_flattened(const StateVector& data, const SolverConfig& config,
                           const TransformedProblem& problem, const Source& source) {
    const GridPtr& grid = data.u.grid();
    if (grid->size() != problem.surface().grid().size()) {
        throw WavelabError("solve_flattened: data and surface live on different grids");
    }
    if (config.scheme == TimeScheme::leapfrog) {
        throw WavelabError("solve_flattened: leapfrog does not support the cross terms");
    }
    const double dt_max = max_stable_dt(problem, config.window, config.cfl_fraction);
    WaveSystem sys(grid, problem.metric(), problem.first_order(), source, &problem);
    Trajectory traj = run(sys, data, config, dt_max, false, {});
    traj.metric = std::make_shared<const MetricField>(problem.metric());
    traj.op = problem.first_order();
    traj.source = source;
    return traj;
}

// ---------------------------------------------------------------- derived system

namespace {

/// Coefficients of the derived system at the nodes at one time.
struct DerivedCoefficients {
    // p[b], dg[m][a][b], dp[m][b]
    std::array<Vec, 2> p;
    std::array<std::array<std::array<Vec, 2>, 2>, 2> dg;
    std::array<std::array<Vec, 2>, 2> dp;
};

DerivedCoefficients derived_coefficients(const MetricField& metric, const PeriodicGrid& grid, double t) {
    const int dim = grid.dim();
    const std::size_t n = grid.size();
    const double d1 = 1e-4, d2 = 1e-3;
    auto gamma_g = [&](const Point& x, int a, int b) { return grid.gamma_at(x) * metric(t, x)(a, b); };
    auto shifted = [](Point x, int axis, double d) {
        x[static_cast<std::size_t>(axis)] += d;
        return x;
    };
    auto p_at = [&](const Point& x, int b) {
        double s = 0.0;
        for (int a = 0; a < dim; ++a) {
            s += (gamma_g(shifted(x, a, d1), a, b) - gamma_g(shifted(x, a, -d1), a, b)) / (2.0 * d1);
        }
        return s / grid.gamma_at(x);
    };
    DerivedCoefficients c;
    for (int b = 0; b < 2; ++b) {
        c.p[static_cast<std::size_t>(b)].assign(n, 0.0);
        for (int m = 0; m < 2; ++m) {
            c.dp[static_cast<std::size_t>(m)][static_cast<std::size_t>(b)].assign(n, 0.0);
            for (int a = 0; a < 2; ++a) c.dg[static_cast<std::size_t>(m)][static_cast<std::size_t>(a)][static_cast<std::size_t>(b)].assign(n, 0.0);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Point x = grid.node_position(i);
        for (int b = 0; b < dim; ++b) {
            const auto ub = static_cast<std::size_t>(b);
            c.p[ub][i] = p_at(x, b);
            for (int m = 0; m < dim; ++m) {
                const auto um = static_cast<std::size_t>(m);
                c.dp[um][ub][i] = (p_at(shifted(x, m, d2), b) - p_at(shifted(x, m, -d2), b)) / (2.0 * d2);
                for (int a = 0; a < dim; ++a) {
                    c.dg[um][static_cast<std::size_t>(a)][ub][i] =
                        (metric(t, shifted(x, m, d1))(a, b) - metric(t, shifted(x, m, -d1))(a, b)) / (2.0 * d1);
                }
            }
        }
    }
    return c;
}

}  // namespace

DerivedTrajectory solve_derived_system(const GridFunction& u0, const GridFunction& u1,
                                       const SolverConfig& config, const MetricField& metric) {
    if (metric.regularity() == Regularity::bounded) {
        throw WavelabError("solve_derived_system: metric must be at least Lipschitz");
    }
    if (config.scheme == TimeScheme::leapfrog) {
        throw WavelabError("solve_derived_system: use a Runge-Kutta scheme");
    }
    const GridPtr& grid = u0.grid();
    const int dim = grid->dim();
    const std::size_t n = grid->size();
    const std::size_t blocks = 1 + static_cast<std::size_t>(dim);
    const double t0 = config.window.t_min;
    const double dt_max = max_stable_dt(metric, *grid, config.window, config.cfl_fraction);

    FirstOrderOperator none;
    WaveSystem scalar(grid, metric, none, {}, nullptr);
    DerivedCoefficients coef = derived_coefficients(metric, *grid, t0);
    double coef_time = t0;

    auto wrap = [&](const double* v) { return GridFunction(grid, Vec(v, v + n)); };
    const Rhs f = [&](double t, const Vec& y, Vec& dy) {
        Vec scalar_y(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(2 * n));
        Vec scalar_dy(2 * n);
        scalar.rhs(t, scalar_y, scalar_dy);
        std::copy(scalar_dy.begin(), scalar_dy.end(), dy.begin());
        if (!metric.static_in_time() && t != coef_time) {
            coef = derived_coefficients(metric, *grid, t);
            coef_time = t;
        }
        std::array<GridFunction, 2> w, dw_first[2];
        for (int m = 0; m < dim; ++m) w[static_cast<std::size_t>(m)] = wrap(y.data() + (1 + m) * 2 * n);
        for (int m = 0; m < dim; ++m) {
            for (int b = 0; b < dim; ++b) {
                dw_first[m][static_cast<std::size_t>(b)] = diff(w[static_cast<std::size_t>(m)], b);
            }
        }
        for (int m = 0; m < dim; ++m) {
            const auto um = static_cast<std::size_t>(m);
            const GridFunction lap = nondivergence_spatial(w[um], metric, t);
            double* dw = dy.data() + (1 + m) * 2 * n;
            const double* W = y.data() + (1 + m) * 2 * n + n;
            for (std::size_t i = 0; i < n; ++i) {
                double acc = lap[i];
                for (int b = 0; b < dim; ++b) {
                    const auto ub = static_cast<std::size_t>(b);
                    acc += coef.p[ub][i] * dw_first[m][ub][i];
                    acc += coef.dp[um][ub][i] * w[ub][i];
                    for (int a = 0; a < dim; ++a) {
                        acc += coef.dg[um][static_cast<std::size_t>(a)][ub][i] * dw_first[b][static_cast<std::size_t>(a)][i];
                    }
                }
                dw[i] = W[i];
                dw[n + i] = acc;
            }
        }
    };

    Vec y(2 * n * blocks, 0.0);
    std::copy(u0.values().begin(), u0.values().end(), y.begin());
    std::copy(u1.values().begin(), u1.values().end(), y.begin() + static_cast<std::ptrdiff_t>(n));
    for (int m = 0; m < dim; ++m) {
        const GridFunction d0 = diff(u0, m), d1 = diff(u1, m);
        std::copy(d0.values().begin(), d0.values().end(), y.begin() + static_cast<std::ptrdiff_t>((1 + m) * 2 * n));
        std::copy(d1.values().begin(), d1.values().end(),
                  y.begin() + static_cast<std::ptrdiff_t>((1 + m) * 2 * n + n));
    }

    DerivedTrajectory out;
    out.expected = 5.0 * grid->min_spacing() * grid->min_spacing();
    out.scalar.origin = t0;
    auto record = [&](double t) {
        StateVector st{wrap(y.data()), wrap(y.data() + n), t};
        st.u.set_time_tag(t);
        st.ut.set_time_tag(t);
        std::vector<GridFunction> comps;
        double drift = 0.0;
        for (int m = 0; m < dim; ++m) {
            GridFunction w = wrap(y.data() + (1 + m) * 2 * n);
            w.set_time_tag(t);
            drift = std::max(drift, (w - diff(st.u, m)).max_abs());
            comps.push_back(std::move(w));
        }
        out.scalar.states.push_back(std::move(st));
        out.components.push_back(std::move(comps));
        out.drift.push_back(drift);
    };
    record(t0);
    const double length = config.window.length();
    const long steps = length > 0.0 ? step_count(length, dt_max) : 0;
    const double dt = steps > 0 ? length / static_cast<double>(steps) : 0.0;
    const int every = effective_store_every(config, steps);
    out.scalar.dt = dt;
    RungeKutta rk(config.scheme, y.size());
    for (long k = 0; k < steps; ++k) {
        const double t = t0 + static_cast<double>(k) * dt;
        rk.step(f, t, dt, y);
        if (!finite(y)) {
            out.failed = true;
            out.diagnostic = "non-finite values in the derived system";
            break;
        }
        if ((k + 1) % every == 0 || k + 1 == steps) {
            record(k + 1 == steps ? config.window.t_max : t + dt);
        }
    }
    out.scalar.metric = std::make_shared<const MetricField>(metric);
    const double worst = out.drift.empty() ? 0.0 : *std::max_element(out.drift.begin(), out.drift.end());
    if (!out.failed && worst > 10.0 * out.expected) {
        out.failed = true;
        std::ostringstream msg;
        msg << "constraint drift " << worst << " exceeds 10x the expected " << out.expected;
        out.diagnostic = msg.str();
    }
    return out;
}

// ---------------------------------------------------------------- monitors

double reduced_energy(const StateVector& state, const MetricField& metric) {
    const auto& grid = state.u.g();
    double s = 0.0;
    for (std::size_t n = 0; n < grid.size(); ++n) s += grid.gamma(n) * state.ut[n] * state.ut[n];
    return s * grid.cell_volume() + gradient_energy(state.u, metric, state.time);
}

namespace {

double source_l2(const Source& f, const PeriodicGrid& grid, double t) {
    double s = 0.0;
    for (std::size_t n = 0; n < grid.size(); ++n) {
        const double v = f(t, grid.node_position(n));
        s += grid.gamma(n) * v * v;
    }
    return std::sqrt(s * grid.cell_volume());
}

}  // namespace

EnergyReport energy_monitor(const Trajectory& traj, const MetricField& metric,
                            const FirstOrderOperator& op, const Source& source) {
    if (traj.states.empty()) throw WavelabError("energy_monitor: empty trajectory");
    const auto& grid = traj.states.front().u.g();
    const TimeWindow w = traj.window();
    const double T = std::max({std::abs(w.t_min), std::abs(w.t_max), 1e-12});
    K1Terms k1;
    if (metric.window().contains(-T) && metric.window().contains(T)) {
        k1 = k1_terms(metric, op, grid, T);
    } else {
        k1 = k1_terms(metric, op, grid, w);
    }
    EnergyReport r;
    r.k1 = k1.total;
    const std::size_t count = traj.states.size();
    std::size_t origin = 0;
    for (std::size_t i = 0; i < count; ++i) {
        if (std::abs(traj.states[i].time - traj.origin) < std::abs(traj.states[origin].time - traj.origin)) {
            origin = i;
        }
    }
    // Cumulative int ||f|| from the origin (Simpson on 8 panels per interval).
    std::vector<double> fint(count, 0.0);
    if (source) {
        auto panel = [&](double a, double b) {
            const int m = 8;
            const double h = (b - a) / m;
            double s = source_l2(source, grid, a) + source_l2(source, grid, b);
            for (int j = 1; j < m; ++j) s += (j % 2 ? 4.0 : 2.0) * source_l2(source, grid, a + j * h);
            return std::abs(s * h / 3.0);
        };
        for (std::size_t i = origin + 1; i < count; ++i) {
            fint[i] = fint[i - 1] + panel(traj.states[i - 1].time, traj.states[i].time);
        }
        for (std::size_t i = origin; i-- > 0;) {
            fint[i] = fint[i + 1] + panel(traj.states[i].time, traj.states[i + 1].time);
        }
    }
    const double e0 = energy(traj.states[origin], metric);
    const double s0 = traj.states[origin].time;
    r.max_violation = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < count; ++i) {
        const double t = traj.states[i].time;
        const double e = energy(traj.states[i], metric);
        const double root = std::sqrt(e0) + fint[i];
        const double bound = std::exp(k1.total * std::abs(t - s0)) * root * root;
        r.times.push_back(t);
        r.energies.push_back(e);
        r.bound_curve.push_back(bound);
    }
    for (double m : r.margins()) r.max_violation = std::min(r.max_violation, m);
    return r;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, int every) {
    every = std::max(1, every);
    os << "# wavelab trajectory v1 origin=" << std::setprecision(17) << traj.origin << "\n";
    os << "t";
    if (!traj.states.empty()) {
        for (std::size_t n = 0; n < traj.states.front().u.size(); ++n) os << ",u" << n;
    }
    os << "\n";
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        if (i % static_cast<std::size_t>(every) != 0 && i + 1 != traj.states.size()) continue;
        const auto& s = traj.states[i];
        os << s.time;
        for (std::size_t n = 0; n < s.u.size(); ++n) os << ',' << s.u[n];
        os << "\n";
    }
}

}  // namespace wavelab
