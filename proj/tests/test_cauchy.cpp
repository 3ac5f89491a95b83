#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "wavelab/cauchy.hpp"
#include "wavelab/goursat.hpp"

using namespace wavelab;

namespace {
constexpr double pi = std::numbers::pi;

StateVector exact_data(const CatalogEntry& e, const GridPtr& g, double t) {
    return {GridFunction::sample(g, [&](const Point& x) { return e.exact->u(t, x); }),
            GridFunction::sample(g, [&](const Point& x) { return e.exact->ut(t, x); }), t};
}

double max_error(const Trajectory& tr, const CatalogEntry& e) {
    double err = 0.0;
    for (const auto& s : tr.states) {
        for (std::size_t n = 0; n < s.u.size(); ++n) {
            err = std::max(err, std::abs(s.u[n] - e.exact->u(s.time, s.u.g().node_position(n))));
        }
    }
    return err;
}

double mms_error(const std::string& name, int N, TimeScheme scheme = TimeScheme::rk4) {
    const auto e = catalog(name);
    auto g = PeriodicGrid::make(std::vector<int>(static_cast<std::size_t>(e.dim), N));
    SolverConfig c;
    c.window = {-1.0, 1.0};
    c.scheme = scheme;
    const auto tr = solve_cauchy(exact_data(e, g, 0.0), c, e.metric, e.op, e.exact->f);
    REQUIRE_FALSE(tr.aborted);
    return max_error(tr, e);
}
}  // namespace

TEST_CASE("stable step of the untransformed problem") {
    const auto e = catalog("flat1d");
    auto g = PeriodicGrid::make({64});
    CHECK(max_stable_dt(e.metric, *g, {0.0, 1.0}, 0.5) == doctest::Approx(0.5 * g->spacing(0)));
    auto g2 = PeriodicGrid::make({32, 32});
    CHECK(max_stable_dt(catalog("flat2d").metric, *g2, {0.0, 1.0}, 0.5) ==
          doctest::Approx(0.5 * g2->spacing(0) / std::sqrt(2.0)));
    auto gs = PeriodicGrid::make({64});
    CHECK(max_stable_dt(catalog("smooth1d").metric, *gs, {0.0, 1.0}, 0.5) ==
          doctest::Approx(0.5 * gs->spacing(0) / std::sqrt(1.5)).epsilon(1e-3));
}

TEST_CASE("flat traveling wave converges at second order in both directions") {
    const double e1 = mms_error("flat1d", 64), e2 = mms_error("flat1d", 128);
    CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("manufactured solutions converge at second order") {
    for (const char* name : {"smooth1d", "c1_1d"}) {
        const double e1 = mms_error(name, 64), e2 = mms_error(name, 128);
        CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.1));
    }
}

TEST_CASE("all time schemes agree on the flat problem") {
    const double ref = mms_error("flat1d", 128);
    for (auto s : {TimeScheme::leapfrog, TimeScheme::ssp_rk3}) CHECK(mms_error("flat1d", 128, s) < 2.0 * ref);
}

TEST_CASE("solver preconditions") {
    auto g = PeriodicGrid::make({32});
    const auto c1 = catalog("c1_1d");
    SolverConfig c;
    c.window = {-2.0, 2.0};
    CHECK_THROWS_AS(solve_cauchy(exact_data(c1, g, 0.0), c, c1.metric, c1.op), WavelabError);
    const auto s = catalog("smooth1d");
    c.window = {0.0, 1.0};
    c.scheme = TimeScheme::leapfrog;
    CHECK_THROWS_AS(solve_cauchy(exact_data(s, g, 0.0), c, s.metric, s.op), WavelabError);
    c.scheme = TimeScheme::rk4;
    c.window = {0.5, 1.0};
    CHECK_THROWS_AS(solve_cauchy(exact_data(s, g, 0.0), c, s.metric, s.op), WavelabError);
}

TEST_CASE("trajectory interpolation reproduces stored states") {
    const auto e = catalog("flat1d");
    auto g = PeriodicGrid::make({32});
    SolverConfig c;
    c.window = {-0.5, 0.5};
    const auto tr = solve_cauchy(exact_data(e, g, 0.0), c, e.metric, e.op);
    const auto& mid = tr.states[tr.states.size() / 3];
    const auto s = tr.interpolate(mid.time);
    for (std::size_t n = 0; n < g->size(); ++n) CHECK(s.u[n] == doctest::Approx(mid.u[n]));
    CHECK(tr.interpolate_node(5, 0.123) == doctest::Approx(std::sin(g->node_position(5)[0] - 0.123)).epsilon(1e-3));
    CHECK_THROWS_AS(tr.interpolate(0.6), WavelabError);
    CHECK(tr.origin == 0.0);
}

TEST_CASE("energy monitor respects the estimate with a source") {
    const auto e = catalog("smooth1d");
    auto g = PeriodicGrid::make({128});
    SolverConfig c;
    c.window = {-1.0, 1.0};
    const auto tr = solve_cauchy(exact_data(e, g, 0.0), c, e.metric, e.op, e.exact->f);
    const auto rep = energy_monitor(tr, e.metric, e.op, e.exact->f);
    CHECK(rep.max_violation >= -1e-12);
    CHECK(rep.k1 > 1.0);
    CHECK(rep.times.size() == tr.states.size());
}

TEST_CASE("reduced energy is conserved on the flat problem") {
    const auto e = catalog("flat1d");
    auto g = PeriodicGrid::make({128});
    SolverConfig c;
    c.window = {0.0, 2.0 * pi};
    const auto tr = solve_cauchy(exact_data(e, g, 0.0), c, e.metric, e.op);
    const double e0 = reduced_energy(tr.states.front(), e.metric);
    for (const auto& s : tr.states) CHECK(std::abs(reduced_energy(s, e.metric) - e0) < 1e-4 * e0);
}

TEST_CASE("flattened slice problem is the slowed wave equation") {
    const auto e = catalog("flat1d");
    auto g = PeriodicGrid::make({128});
    const auto slice = surface_catalog("slice", g, e.metric);
    const double lambda = 0.64, c = std::sqrt(lambda);
    const auto p = flatten(e.metric, e.op, slice, lambda);
    StateVector d{GridFunction::sample(g, [](const Point& x) { return std::sin(x[0]); }),
                  GridFunction::sample(g, [c](const Point& x) { return -c * std::cos(x[0]); }), 0.0};
    SolverConfig sc;
    sc.window = {0.0, 1.0};
    const auto tr = solve_flattened(d, sc, p);
    const auto& last = tr.states.back();
    for (std::size_t n = 0; n < g->size(); n += 7) {
        CHECK(last.u[n] == doctest::Approx(std::sin(g->node_position(n)[0] - c * last.time)).epsilon(1e-3));
    }
    CHECK(max_stable_dt(p, sc.window, 0.5) == doctest::Approx(0.5 * g->spacing(0) / c));
}

TEST_CASE("flattened cone converges to the slowed d'Alembert solution") {
    // u = sin(x - sqrt(lambda) t) solves the slowed equation; in flattened
    // variables w(s, x) = u(s + phi(x), x).
    const auto e = catalog("flat1d");
    const double lambda = 0.9375, c = std::sqrt(lambda), S = 1.0;
    std::vector<double> errs;
    for (int N : {128, 256}) {
        auto g = PeriodicGrid::make({N});
        const auto s = surface_catalog("cone", g, e.metric);
        const auto p = flatten(e.metric, e.op, s, lambda);
        StateVector d{GridFunction(g, 0.0), GridFunction(g, 0.0), 0.0};
        for (std::size_t n = 0; n < g->size(); ++n) {
            const double arg = g->node_position(n)[0] - c * s.phi[n];
            d.u[n] = std::sin(arg);
            d.ut[n] = -c * std::cos(arg);
        }
        SolverConfig sc;
        sc.window = {0.0, S};
        sc.max_stored = 50;
        const auto tr = solve_flattened(d, sc, p);
        REQUIRE_FALSE(tr.aborted);
        const auto& last = tr.states.back();
        double err = 0.0;
        for (std::size_t n = 0; n < g->size(); ++n) {
            err = std::max(err, std::abs(last.u[n] - std::sin(g->node_position(n)[0] - c * (last.time + s.phi[n]))));
        }
        errs.push_back(err);
    }
    CHECK(errs[1] < 2e-3);
    CHECK(errs[0] / errs[1] > 3.0);
}

TEST_CASE("derived system tracks the differences of the scalar solution") {
    const auto e = catalog("smooth1d");
    for (int N : {64, 128}) {
        auto g = PeriodicGrid::make({N});
        SolverConfig c;
        c.window = {0.0, 1.0};
        const auto d = solve_derived_system(GridFunction::sample(g, [](const Point& x) { return std::sin(x[0]); }),
                                            GridFunction::sample(g, [](const Point& x) { return std::cos(2.0 * x[0]); }),
                                            c, e.metric);
        const double h = g->spacing(0);
        CHECK(d.expected == doctest::Approx(5.0 * h * h));
        CHECK_FALSE(d.failed);
        for (double drift : d.drift) CHECK(drift <= 5.0 * h * h);
        CHECK(d.components.size() == d.scalar.states.size());
    }
}

TEST_CASE("trajectory csv has a versioned header") {
    const auto e = catalog("flat1d");
    auto g = PeriodicGrid::make({8});
    SolverConfig c;
    c.window = {0.0, 0.1};
    const auto tr = solve_cauchy(exact_data(e, g, 0.0), c, e.metric, e.op);
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    CHECK(os.str().rfind("# wavelab trajectory v1", 0) == 0);
}

TEST_CASE("scheme names") {
    CHECK(parse_scheme("rk4") == TimeScheme::rk4);
    CHECK(parse_scheme("rk3") == TimeScheme::ssp_rk3);
    CHECK(to_string(TimeScheme::leapfrog) == "leapfrog");
    CHECK_THROWS_AS(parse_scheme("euler"), WavelabError);
}
