#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wavelab/fields.hpp"
#include "wavelab/grid.hpp"

namespace wavelab {

enum class CausalType { spacelike, null, weakly_spacelike, timelike_invalid };

std::string to_string(CausalType c);

/// Graph Sigma = {(phi(x), x)} of a Lipschitz function on the torus.
///
/// `grad` holds one gradient component per axis. Nodes whose one-sided
/// slopes disagree by more than sqrt(spacing) are kinks; their residuals are
/// not used for classification (an a.e. condition only sees non-kink nodes).
/// At a kink the residual is the mean of the forward and backward one-sided
/// residuals.
struct CharacteristicSurface {
    std::string name;
    GridFunction phi;
    std::vector<GridFunction> grad;
    std::vector<GridFunction> grad_forward;
    std::vector<GridFunction> grad_backward;
    std::vector<char> kink;
    double lipschitz_bound = 0.0;
    std::optional<CausalType> classification;

    const PeriodicGrid& grid() const { return phi.g(); }
    std::size_t kink_count() const;
};

/// Surface from sampled values; gradients are centered differences, kinks
/// are detected from one-sided slope gaps.
CharacteristicSurface make_surface(GridFunction phi, std::string name = "custom");

/// Surface whose gradient is known independently of the node values (analytic
/// or resolved by a finer construction). Kinks are still detected from the
/// node values; the supplied gradient is used at non-kink nodes.
CharacteristicSurface make_surface(GridFunction phi, std::vector<GridFunction> grad,
                                   std::string name);

/// g^{ab}(phi(x), x) d_a phi d_b phi - 1 per node.
GridFunction eikonal_residual(const CharacteristicSurface& s, const MetricField& metric);

CausalType classify(const CharacteristicSurface& s, const MetricField& metric, double tol = 1e-6);

/// Copy of `s` with its classification filled in.
CharacteristicSurface classified(CharacteristicSurface s, const MetricField& metric,
                                 double tol = 1e-6);

/// Density of dnu0 relative to dnu_Sigma: 1 - g^{ab} d_a phi d_b phi. Throws
/// for timelike surfaces.
GridFunction dnu0_density(const CharacteristicSurface& s, const MetricField& metric,
                          double tol = 1e-6);

/// Sigma_t = {(t + phi(x), x)}, reclassified against `metric`.
CharacteristicSurface foliation_slice(const CharacteristicSurface& s, double t,
                                      const MetricField& metric, double tol = 1e-6);

/// Exactly null cone with vertex at node `vertex`, built by integrating
/// phi' = +-1/sqrt(g^{11}(phi, x)) outward in both directions and taking the
/// first arrival. Dimension 1 only.
CharacteristicSurface eikonal_cone(GridPtr grid, const MetricField& metric,
                                   std::size_t vertex = 0, double phi_vertex = 0.0,
                                   int substeps = 64);

/// Builtin surfaces: "cone" (null, vertex at the origin), "flatcone" (cone
/// capped at half its height: weakly spacelike), "slice" (phi = 0),
/// "sine" (phi = sin(x)/2) and "sawtooth" (slope +-2: timelike).
CharacteristicSurface surface_catalog(std::string_view name, GridPtr grid,
                                      const MetricField& metric, double tol = 1e-6);
std::vector<std::string> surface_names();

/// The problem rewritten in s = t - phi(x), with the propagation speed scaled
/// by lambda. In divergence form,
///
///   d_s(a d_s u + c^a d_a u) - gamma^{-1} d_a(gamma (lambda g^{ab} d_b u - c^a d_s u))
///     + p0 d_s u + p^a d_a u + q u = f,
///
/// with a = 1 - lambda g^{ab} d_a phi d_b phi, c^a = lambda g^{ab} d_b phi,
/// p0 = b0 - b^a d_a phi, p^a = b^a, q = c, all coefficients of the original
/// problem evaluated at t = s + phi(x).
class TransformedProblem {
public:
    TransformedProblem(MetricField metric, FirstOrderOperator op, CharacteristicSurface surface,
                       double lambda);

    const MetricField& metric() const { return metric_; }
    const FirstOrderOperator& first_order() const { return op_; }
    const CharacteristicSurface& surface() const { return surface_; }
    double lambda() const { return lambda_; }

    /// Coefficient of d_s^2 at every node at flattened time s.
    GridFunction a(double s) const;
    /// Cross coefficient c^axis at every node at flattened time s.
    GridFunction cross(int axis, double s) const;
    /// phi averaged to cell centers (used for cell-centred metric samples).
    const std::vector<double>& phi_cells() const { return phi_cells_; }
    /// Minimum of a over the s-samples in [s0, s1] (all nodes).
    double a_min(double s0, double s1, int samples = 17) const;
    /// Largest |c| (Euclidean) over the same samples.
    double cross_max(double s0, double s1, int samples = 17) const;

    /// Fills a and c^axis at flattened time s (spans sized to the grid; c1
    /// is ignored in dimension 1).
    void fill_coefficients(double s, std::span<double> a, std::span<double> c0,
                           std::span<double> c1) const;

    /// Staggered variant used by the solver: c^a from the cell gradient of phi
    /// at cell centers, a at cells averaged onto the nodes. Unlike the nodal
    /// form it stays well defined where phi has kinks.
    void fill_cell_coefficients(double s, std::span<double> a_nodes, std::span<double> c0_cells,
                                std::span<double> c1_cells) const;

private:
    MetricField metric_;
    FirstOrderOperator op_;
    CharacteristicSurface surface_;
    double lambda_;
    std::vector<double> phi_cells_;
};

/// Change of variables s = t - phi(x) with speed reduction lambda in (0, 1).
/// Throws when lambda is out of range, the surface is timelike, or
/// a = 1 - lambda g grad(phi) grad(phi) is not positive.
TransformedProblem flatten(const MetricField& metric, const FirstOrderOperator& op,
                           const CharacteristicSurface& surface, double lambda,
                           double tol = 1e-6);

/// CSV dump: x, phi, residual, kink_flag (dimension 1 writes x; dimension 2
/// writes x,y).
void write_surface_csv(std::ostream& os, const CharacteristicSurface& s,
                       const MetricField& metric);

}  // namespace wavelab
