#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wavelab/grid.hpp"

namespace wavelab {

struct TimeWindow {
    double t_min = -1.0;
    double t_max = 1.0;

    bool contains(double t, double slack = 1e-12) const {
        return t >= t_min - slack && t <= t_max + slack;
    }
    double length() const { return t_max - t_min; }
};

enum class Regularity { smooth, c1, lipschitz, bounded };

std::string to_string(Regularity r);

/// Symmetric 2x2 matrix (xx, xy, yy); in dim 1 only xx is used.
struct Sym2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;

    double operator()(int a, int b) const { return a == 0 ? (b == 0 ? xx : xy) : (b == 0 ? xy : yy); }
};

/// General (not necessarily symmetric) 2x2 matrix as returned by metric
/// evaluators, so that symmetry can be validated.
using Matrix2 = std::array<std::array<double, 2>, 2>;

/// Eigenvalue envelope [lower, upper] of the inverse metric g^{ab}.
struct Envelope {
    double lower = 1.0;
    double upper = 1.0;
};

/// Time-dependent inverse metric g^{ab}(t, x) on the torus.
///
/// The declared envelope bounds the eigenvalues of g^{ab}; in terms of the
/// lower-index metric, C1(t) = 1 / upper and C2(t) = 1 / lower.
class MetricField {
public:
    using Evaluator = std::function<Matrix2(double t, const Point& x)>;
    using Bounds = std::function<Envelope(double t)>;

    MetricField(int dim, Evaluator eval, Regularity tag, TimeWindow window, Bounds declared,
                bool static_in_time = false);

    int dim() const { return dim_; }
    Matrix2 matrix(double t, const Point& x) const { return eval_(t, x); }
    /// Symmetrized entries.
    Sym2 operator()(double t, const Point& x) const;
    Regularity regularity() const { return tag_; }
    const TimeWindow& window() const { return window_; }
    Envelope declared_bounds(double t) const { return bounds_(t); }
    /// True when g does not depend on t; lets solvers cache coefficients.
    bool static_in_time() const { return static_; }

    /// Samples g at the nodes of `grid`.
    std::vector<Sym2> sample_nodes(const PeriodicGrid& grid, double t) const;

private:
    int dim_;
    Evaluator eval_;
    Regularity tag_;
    TimeWindow window_;
    Bounds bounds_;
    bool static_;
};

/// One coefficient of a first order operator; an empty closure means zero.
struct Coefficient {
    std::function<double(double t, const Point& x)> f;
    Regularity tag = Regularity::smooth;

    bool is_zero() const { return !f; }
    double operator()(double t, const Point& x) const { return f ? f(t, x) : 0.0; }
    GridFunction sample(const GridPtr& grid, double t) const;
};

/// L1 = b0 d_t + b^a d_a + c.
struct FirstOrderOperator {
    Coefficient b0;
    std::array<Coefficient, 2> b;
    Coefficient c;

    bool is_zero() const { return b0.is_zero() && b[0].is_zero() && b[1].is_zero() && c.is_zero(); }
    /// Sup of |b0| + sum |b^a| + |c| split per coefficient, over sampled
    /// (t, node) pairs.
    struct Sup {
        double b0 = 0.0;
        double b = 0.0;
        double c = 0.0;
    };
    Sup sup_norms(const PeriodicGrid& grid, TimeWindow window, int sample_times) const;
};

/// Closed-form solution data for manufactured-solution checks.
struct ExactSolution {
    std::function<double(double t, const Point& x)> u;
    std::function<double(double t, const Point& x)> ut;
    /// Source f = box u + L1 u; empty for homogeneous problems.
    std::function<double(double t, const Point& x)> f;
};

/// Cauchy data pair (u, d_t u) at a time slice.
struct StateVector {
    GridFunction u;
    GridFunction ut;
    double time = 0.0;
};

struct CatalogEntry {
    std::string name;
    int dim = 1;
    MetricField metric;
    FirstOrderOperator op;
    std::optional<ExactSolution> exact;
};

/// Builtin test problems: flat1d, smooth1d, lipschitz1d, c1_1d, flat2d.
/// `epsilon` is the drift amplitude of c1_1d.
CatalogEntry catalog(std::string_view name, double epsilon = 0.1);
std::vector<std::string> catalog_names();

/// Sampled eigenvalue envelope of g^{ab} over window x (nodes and cell
/// centers). Throws on asymmetric matrices, non-positive eigenvalues, or
/// samples outside the metric's declared bounds.
Envelope validate_ellipticity(const MetricField& metric, const PeriodicGrid& grid,
                              TimeWindow window, int sample_times);

/// Cell-centred flux tensor gamma * scale * g^{ab}(t, cell center).
std::vector<Sym2> cell_flux_tensor(const PeriodicGrid& grid, const MetricField& metric, double t,
                                   double scale = 1.0);

/// Gradient of nodal data at the center of `cell` (averaged edge differences).
std::array<double, 2> cell_gradient(const PeriodicGrid& grid, std::span<const double> u,
                                    std::size_t cell);

/// out = gamma^{-1} div(M grad u) with the compact flux stencil; `out` is
/// overwritten.
void apply_flux_divergence(const PeriodicGrid& grid, std::span<const Sym2> cell_tensor,
                           std::span<const double> u, std::span<double> out);

/// Spatial part of the d'Alembertian, gamma^{-1} d_a(gamma g^{ab} d_b u), in
/// flux form.
GridFunction dalembertian_spatial(const GridFunction& u, const MetricField& metric, double t);

/// g^{ab} d_a d_b u at the nodes (compact second differences, centered mixed
/// terms).
GridFunction nondivergence_spatial(const GridFunction& u, const MetricField& metric, double t);

/// b0 u_t + b^a d_a u + c u at time t (centered differences).
GridFunction apply_first_order(const StateVector& state, const FirstOrderOperator& op, double t);

struct NondivergenceForm {
    FirstOrderOperator op;
    /// Set when the metric derivative came from a grid-scale centered
    /// difference of a Lipschitz metric.
    bool approximate_derivative = false;
};

/// Rewrites box + L1 as d_t^2 - g^{ab} d_a d_b + L~1 with p0 = b0,
/// p^b = -gamma^{-1} d_a(gamma g^{ab}) + b^b, q = c.
NondivergenceForm to_nondivergence_form(const MetricField& metric, const FirstOrderOperator& op,
                                        const PeriodicGrid& grid);

}  // namespace wavelab
