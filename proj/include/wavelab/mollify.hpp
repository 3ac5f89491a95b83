#pragma once

#include <vector>

#include "wavelab/fields.hpp"
#include "wavelab/grid.hpp"

namespace wavelab {

/// Time-indexed family of slices w(t_i, .); slices carry their time tags.
using FieldFamily = std::vector<GridFunction>;

/// Slice of `w` at time t: exact tag match, otherwise linear interpolation
/// between the bracketing slices. Throws outside the tagged range.
GridFunction slice_at(const FieldFamily& w, double t);

/// Discrete approximate identity rho_k(y) = A_k (1 - |y|^2 / R_k^2)^2 on
/// |y| < R_k = base_radius / k, normalized to unit mass on the grid.
struct Mollifier {
    GridFunction profile;
    /// d_a rho_k sampled from the analytic derivative with the same
    /// normalization as `profile`.
    std::vector<GridFunction> gradient;
    int level = 1;
    double base_radius = 0.0;
    double radius = 0.0;
    /// C(rho) = base_radius * sum_a ||d_a rho||_{L^1} for the unit-level
    /// profile; independent of k.
    double constant = 0.0;
};

/// Default base radius: a quarter of the half circumference (L / 8) along the
/// shortest axis.
double default_base_radius(const PeriodicGrid& grid);

Mollifier make_mollifier(GridPtr grid, int k, double base_radius = 0.0);

/// Level k whose support radius is about four grid spacings.
int grid_tied_level(const PeriodicGrid& grid, double base_radius = 0.0);

/// w_k(t) = w(t) * rho_k for every slice.
FieldFamily mollify_space(const FieldFamily& w, int k, double base_radius = 0.0);

struct CommutatorDefect {
    GridFunction field;
    double l2_norm = 0.0;
    /// C(rho) * Lip(h) * ||w(t)||_{H^1} (times sqrt(dim) for the sum over b).
    double bound = 0.0;
    double lipschitz = 0.0;
    double h1_norm = 0.0;
};

/// F_k = h^{ab} [(d_b w) * d_a rho_k] - (h^{ab} d_b w) * d_a rho_k at time t.
CommutatorDefect commutator_defect(const MetricField& h, const FieldFamily& w, int k, double t,
                                   double base_radius = 0.0);

/// Largest node-to-node slope of every entry of h(t, .), combined over axes.
double lipschitz_envelope(const MetricField& h, const PeriodicGrid& grid, double t);

struct RegularizedCoefficients {
    MetricField metric;
    FirstOrderOperator op;
};

/// Space-time mollification of the metric and of the coefficients of L1 at
/// level k. Time uses a bump of the same radius sampled at 2 * time_half + 1
/// points and reflected at the metric window edges.
RegularizedCoefficients regularize_coefficients(const MetricField& metric,
                                                const FirstOrderOperator& op,
                                                const PeriodicGrid& grid, int k,
                                                double base_radius = 0.0, int time_half = 4);

}  // namespace wavelab
