#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wavelab/fields.hpp"
#include "wavelab/grid.hpp"
#include "wavelab/norms.hpp"
#include "wavelab/surface.hpp"

namespace wavelab {

using Source = std::function<double(double t, const Point& x)>;

enum class TimeScheme { leapfrog, rk2_system, ssp_rk3, rk4 };

std::string to_string(TimeScheme s);
TimeScheme parse_scheme(const std::string& name);

struct SolverConfig {
    double cfl_fraction = 0.5;
    int store_every = 1;
    /// When positive, store_every is raised so that at most this many steps
    /// are kept per direction.
    int max_stored = 0;
    TimeScheme scheme = TimeScheme::rk4;
    /// Interval to cover. The data time must lie inside; the solver marches
    /// forward to t_max and backward to t_min.
    TimeWindow window{0.0, 1.0};
};

/// Stored states of one solve, in increasing time.
///
/// For flattened solves `time` is the flattened time s and `ut` is d_s u.
class Trajectory {
public:
    std::vector<StateVector> states;
    double dt = 0.0;
    /// Time of the Cauchy data.
    double origin = 0.0;
    std::shared_ptr<const MetricField> metric;
    FirstOrderOperator op;
    Source source;
    bool aborted = false;
    std::string diagnostic;

    const GridPtr& grid() const { return states.front().u.grid(); }
    TimeWindow window() const { return {states.front().time, states.back().time}; }

    /// Cubic Hermite reconstruction from the bracketing stored states (u and
    /// d_t u at both ends). Throws outside the stored range.
    StateVector interpolate(double t) const;
    /// u at a single node; same reconstruction.
    double interpolate_node(std::size_t node, double t) const;
    /// d_t u at a single node (derivative of the same cubic).
    double interpolate_node_rate(std::size_t node, double t) const;

private:
    std::size_t bracket(double t) const;
};

/// Largest stable step for the untransformed problem:
/// cfl * h_min / sqrt(dim * sup g-envelope) over the window.
double max_stable_dt(const MetricField& metric, const PeriodicGrid& grid, TimeWindow window,
                     double cfl_fraction = 0.5);

/// Stable step in flattened time over [s0, s1]:
/// cfl * h_min * min_x 2a / (|c| + sqrt(|c|^2 + 4 a lambda G)) / sqrt(dim), with G
/// the upper g-envelope. Equals the untransformed step when a = 1, c = 0.
double max_stable_dt(const TransformedProblem& problem, TimeWindow s_window,
                     double cfl_fraction = 0.5);

/// box u + L1 u = f from data at data.time. Deterministic.
///
/// The solve aborts (trajectory.aborted, with a diagnostic) when the energy
/// exceeds ten times the energy-estimate bound or a value becomes non-finite.
Trajectory solve_cauchy(const StateVector& data, const SolverConfig& config,
                        const MetricField& metric, const FirstOrderOperator& op,
                        const Source& source = {});

/// The same solver on a flattened problem. `data.ut` is d_s u at s = data.time
/// and the window is in s. Aborts on non-finite values only.
Trajectory solve_flattened(const StateVector& data, const SolverConfig& config,
                           const TransformedProblem& problem, const Source& source = {});

/// Homogeneous equation box u = 0 together with the spatial derivatives
/// w_m = d_m u, evolved by the derived system
///
///   d_t^2 w_m - g^{ab} d_a d_b w_m = p^b d_b w_m + (d_m g^{ab}) d_a w_b + (d_m p^b) w_b,
///   p^b = gamma^{-1} d_a(gamma g^{ab}).
struct DerivedTrajectory {
    Trajectory scalar;
    /// components[i][m] is w_m at scalar.states[i].time.
    std::vector<std::vector<GridFunction>> components;
    /// max |w_m - centered diff of u| at every stored time.
    std::vector<double> drift;
    double expected = 0.0;
    bool failed = false;
    std::string diagnostic;
};

DerivedTrajectory solve_derived_system(const GridFunction& u0, const GridFunction& u1,
                                       const SolverConfig& config, const MetricField& metric);

/// E(t) at every stored time against
/// E(origin) exp(K1 |t - origin|) without a source, and
/// exp(K1 |t - origin|) (sqrt(E(origin)) + |int_origin^t ||f||_{L^2} dt|)^2 with one.
EnergyReport energy_monitor(const Trajectory& traj, const MetricField& metric,
                            const FirstOrderOperator& op, const Source& source = {});

/// int (u_t^2 + g^{ab} d_a u d_b u) dnu, the conserved energy of box u = 0.
double reduced_energy(const StateVector& state, const MetricField& metric);

/// CSV: versioned header, then t followed by the node values of u.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, int every = 1);

}  // namespace wavelab
