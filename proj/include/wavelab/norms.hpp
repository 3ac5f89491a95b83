#pragma once

#include <iosfwd>
#include <vector>

#include "wavelab/fields.hpp"
#include "wavelab/grid.hpp"
#include "wavelab/surface.hpp"

namespace wavelab {

/// E(t, u) = int (|u_t|^2 + g^{ab} d_a u d_b u + |u|^2) dnu, with the gradient
/// term summed over cells so that it matches the flux-form operator.
double energy(const StateVector& state, const MetricField& metric);

/// The gradient part alone, int g^{ab} d_a u d_b u dnu at time t.
double gradient_energy(const GridFunction& u, const MetricField& metric, double t);

/// Flat-torus Sobolev norm, k in {0, 1, 2}.
double hk_norm(const GridFunction& f, int k);

/// ||psi||_{H^1(Sigma; g)}: int (|psi|^2 + g^{ab}(phi(x), x) d_a psi d_b psi) dnu.
double sigma_h1_norm(const GridFunction& psi, const CharacteristicSurface& surface,
                     const MetricField& metric);

/// L^2 norm of psi against dnu0_Sigma = (1 - g^{ab} d_a phi d_b phi) dnu_Sigma.
/// Throws for timelike surfaces.
double sigma_l2_dnu0(const GridFunction& psi, const CharacteristicSurface& surface,
                     const MetricField& metric, double tol = 1e-6);

/// Energy integrand of `state` restricted to {x : phi(x) <= t}.
double energy_phi(const StateVector& state, const CharacteristicSurface& surface,
                  const MetricField& metric, double t);

/// Breakdown of the admissible energy-growth rate.
struct K1Terms {
    double dt_metric = 0.0;     ///< sup |d_t g^{ab}| (operator norm)
    double div_metric = 0.0;    ///< sup |gamma^{-1} d_a(gamma g^{ab})|
    double b0 = 0.0;
    double b = 0.0;
    double c = 0.0;
    double lower_eigen = 1.0;   ///< smallest eigenvalue of g^{ab} on the window
    double total = 1.0;
};

/// Admissible K1 for E(t) <= E(s) exp(K1 |t - s|) on [-T, T]:
///
///   K1 = k |d_t g| + 2 k |gamma^{-1} d_a(gamma g)| + 2 (|b0| + k |b| + |c|) + 1,
///
/// with k = max(1, 1 / lower_eigen), every sup taken over `sample_times`
/// times in [-T, T] and all grid nodes.
K1Terms k1_terms(const MetricField& metric, const FirstOrderOperator& op, const PeriodicGrid& grid,
                 double T, int sample_times = 65);
/// Same sups over an arbitrary interval of the metric window.
K1Terms k1_terms(const MetricField& metric, const FirstOrderOperator& op, const PeriodicGrid& grid,
                 TimeWindow interval, int sample_times = 65);
double k1_bound(const MetricField& metric, const FirstOrderOperator& op, const PeriodicGrid& grid,
                double T, int sample_times = 65);

struct EnergyReport {
    std::vector<double> times;
    std::vector<double> energies;
    std::vector<double> bound_curve;
    /// min over t of (bound - energy) / bound; negative means a violation.
    double max_violation = 0.0;
    double k1 = 0.0;

    std::vector<double> margins() const;
};

/// CSV with columns t, energy, bound, margin after a versioned header line.
void write_energy_csv(std::ostream& os, const EnergyReport& report);

}  // namespace wavelab
