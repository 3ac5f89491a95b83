#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wavelab/cauchy.hpp"
#include "wavelab/fields.hpp"
#include "wavelab/surface.hpp"

namespace wavelab {

/// psi(x) = u(phi(x), x), each node interpolated in time independently.
/// Throws when the range of phi leaves the stored window.
GridFunction trace_on_surface(const Trajectory& traj, const CharacteristicSurface& surface);

/// d_t u on the surface, same reconstruction.
GridFunction trace_rate_on_surface(const Trajectory& traj, const CharacteristicSurface& surface);

/// 1 - 2^{-k}, k = 2..8.
std::vector<double> default_lambda_schedule();

struct GoursatConfig {
    /// cfl_fraction and scheme are used for every stage; the window is set
    /// internally.
    SolverConfig solver;
    std::vector<double> lambda_schedule = default_lambda_schedule();
    /// Stop once an H^1(Sigma) gap falls below gap_tolerance * ||v||_{H^1(Sigma)}.
    double gap_tolerance = 1e-6;
    /// Stages needing more flattened steps than this are skipped (warning).
    long max_steps = 4000000;
    int max_stored = 4000;
    /// Mollify Lipschitz coefficients at the grid-tied level before solving.
    bool regularize_rough = true;
};

struct GoursatResult {
    /// Original-equation solution on [min phi, max phi] for the last stage.
    Trajectory trajectory;
    std::vector<double> lambda_schedule;
    /// H^1(Sigma) distance between the traces of consecutive stages.
    std::vector<double> successive_h1_gaps;
    std::vector<double> stage_roundtrip_l2;
    std::vector<double> stage_roundtrip_h1;
    std::vector<long> stage_steps;
    double roundtrip_l2 = 0.0;
    double roundtrip_h1 = 0.0;
    /// False when v = 0 and the errors are absolute.
    bool relative = true;
    bool warning = false;
    std::string warning_message;
    /// Cauchy data handed from the last flattened stage to the original solve.
    StateVector cauchy_data;
    /// Level used when the coefficients were mollified (0 otherwise).
    int mollifier_level = 0;
};

/// Characteristic problem u|_Sigma = v through lambda-slowdown: for every
/// lambda in the schedule the flattened problem is solved from s = 0 with data
/// (v, 0) up to s = max phi - min phi; the Cauchy data it induces at
/// t = max phi are evolved by the original equation back to Sigma and traced.
GoursatResult solve_goursat(const GridFunction& v, const CharacteristicSurface& surface,
                            const MetricField& metric, const FirstOrderOperator& op,
                            const GoursatConfig& config = {});

struct RoundTrip {
    double l2 = 0.0;
    double h1 = 0.0;
    bool relative = true;
};

/// ||trace - v|| / ||v|| in L^2 and H^1(Sigma); absolute when v = 0.
RoundTrip roundtrip_error(const GridFunction& v, const GoursatResult& result,
                          const CharacteristicSurface& surface, const MetricField& metric);
RoundTrip roundtrip_error(const GridFunction& v, const GridFunction& trace,
                          const CharacteristicSurface& surface, const MetricField& metric);

struct TraceConstants {
    double k2 = 0.0;
    double k3 = 0.0;
    /// ||trace||_{1,Sigma} / sup_t sqrt(E(t)) per ensemble member.
    std::vector<double> ratios;
    double k1 = 0.0;
    double max_violation = 0.0;
};

/// Empirical two-sided trace constants over seeded random Cauchy data at
/// t = 0 (Fourier modes up to 4), each solved on [-T, T].
/// ||trace||^2_{1,Sigma} = ||psi||^2_{H^1(Sigma)} + ||d_t u|_Sigma||^2_{L^2(dnu0)}.
TraceConstants estimate_trace_constants(const MetricField& metric, const FirstOrderOperator& op,
                                        const CharacteristicSurface& surface, double T,
                                        int ensemble_size, std::uint64_t seed,
                                        const SolverConfig& solver = {});

/// Random band-limited field with modes |m| <= max_mode per axis.
GridFunction random_band_limited(const GridPtr& grid, std::uint64_t seed, int max_mode = 4);

struct ContinuityRow {
    double t0 = 0.0;
    double t1 = 0.0;
    double modulus = 0.0;
};

/// ||v(t_{i+1}) - v(t_i)||_{H^1} / |t_{i+1} - t_i| for v(t, x) = u(t + phi(x), x).
std::vector<ContinuityRow> foliation_continuity(const Trajectory& traj,
                                                const CharacteristicSurface& surface,
                                                const std::vector<double>& times);

}  // namespace wavelab
