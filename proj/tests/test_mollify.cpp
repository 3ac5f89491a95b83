#include <cmath>
#include <numbers>

#include "doctest.h"
#include "wavelab/mollify.hpp"
#include "wavelab/norms.hpp"

using namespace wavelab;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("mollifier has unit mass and shrinking support") {
    auto g = PeriodicGrid::make({256});
    for (int k : {1, 2, 4}) {
        const Mollifier m = make_mollifier(g, k);
        CHECK(integrate_lebesgue(m.profile) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m.radius == doctest::Approx(2.0 * pi / 8.0 / k));
        for (std::size_t n = 0; n < g->size(); ++n) {
            const double y = std::abs(g->wrap_displacement(0, g->node_position(n)[0]));
            if (y >= m.radius) CHECK(m.profile[n] == 0.0);
            CHECK(m.profile[n] >= 0.0);
        }
    }
}

TEST_CASE("profile constant matches the closed form") {
    // int |rho'| = 2 rho(0) for a unimodal bump; rho(0) R = 15/16 in 1d.
    CHECK(make_mollifier(PeriodicGrid::make({32}), 1).constant == doctest::Approx(15.0 / 8.0).epsilon(1e-6));
    // 2d: sum_a int |d_a rho| R = 2 * 4 / pi * int_0^1 ... = 64 / (5 pi).
    CHECK(make_mollifier(PeriodicGrid::make({16, 16}), 1).constant ==
          doctest::Approx(64.0 / (5.0 * pi)).epsilon(1e-4));
}

TEST_CASE("mollifier preconditions") {
    auto g = PeriodicGrid::make({64});
    CHECK_THROWS_AS(make_mollifier(g, 0), WavelabError);
    CHECK_THROWS_AS(make_mollifier(g, 1, 2.0), WavelabError);
    CHECK_THROWS_AS(mollify_space({GridFunction(g, 1.0)}, 0), WavelabError);
}

TEST_CASE("mollification preserves constants and the mean") {
    auto g = PeriodicGrid::make({128});
    const FieldFamily c{GridFunction(g, 3.0)};
    const auto m = mollify_space(c, 2);
    for (std::size_t n = 0; n < g->size(); ++n) CHECK(m[0][n] == doctest::Approx(3.0));
    const FieldFamily w{GridFunction::sample(g, [](const Point& x) { return std::abs(std::sin(x[0])); })};
    CHECK(integrate(mollify_space(w, 4)[0]) == doctest::Approx(integrate(w[0])).epsilon(1e-12));
}

TEST_CASE("H1 mollification error decreases with the level for a kinked field") {
    auto g = PeriodicGrid::make({512});
    const FieldFamily w{GridFunction::sample(g, [](const Point& x) { return std::abs(x[0] - pi); })};
    double prev = 1e300;
    for (int k : {2, 4, 8, 16}) {
        const double e = hk_norm(mollify_space(w, k)[0] - w[0], 1);
        CHECK(e < prev);
        prev = e;
    }
}

TEST_CASE("slice_at interpolates tagged slices") {
    auto g = PeriodicGrid::make({8});
    FieldFamily w{GridFunction(g, 1.0), GridFunction(g, 3.0)};
    w[0].set_time_tag(0.0);
    w[1].set_time_tag(1.0);
    CHECK(slice_at(w, 0.25)[3] == doctest::Approx(1.5));
    CHECK(slice_at(w, 1.0)[0] == doctest::Approx(3.0));
    CHECK_THROWS_AS(slice_at(w, 1.5), WavelabError);
}

TEST_CASE("commutator defect vanishes for constant coefficients and obeys the bound") {
    auto g = PeriodicGrid::make({256});
    const FieldFamily w{GridFunction::sample(g, [](const Point& x) { return std::abs(std::sin(x[0])); }, 0.0)};
    for (int k : {2, 4, 8}) {
        CHECK(commutator_defect(catalog("flat1d").metric, w, k, 0.0).l2_norm < 1e-12);
        const auto d = commutator_defect(catalog("lipschitz1d").metric, w, k, 0.0);
        CHECK(d.l2_norm > 0.0);
        CHECK(d.l2_norm <= d.bound);
        CHECK(d.lipschitz == doctest::Approx(0.5).epsilon(0.01));
    }
}

TEST_CASE("regularized coefficients stay elliptic and are smooth") {
    auto g = PeriodicGrid::make({128});
    const auto e = catalog("lipschitz1d");
    const auto r = regularize_coefficients(e.metric, e.op, *g, 4);
    CHECK(r.metric.regularity() == Regularity::smooth);
    const Envelope env = validate_ellipticity(r.metric, *g, {-0.5, 0.5}, 2);
    CHECK(env.lower >= 1.0 - 1e-12);
    CHECK(env.upper <= 1.5 + 1e-12);
    // The slope jump of |sin x| / 2 at 0 is 1; after smoothing, one-sided
    // slopes agree up to a single quadrature weight everywhere near the kink.
    const double h = 1e-5;
    double worst = 0.0;
    for (int i = -200; i <= 200; ++i) {
        const double x = 0.3 * i / 200.0;
        const double right = (r.metric(0.0, Point{x + h, 0.0}).xx - r.metric(0.0, Point{x, 0.0}).xx) / h;
        const double left = (r.metric(0.0, Point{x, 0.0}).xx - r.metric(0.0, Point{x - h, 0.0}).xx) / h;
        worst = std::max(worst, std::abs(right - left));
    }
    CHECK(worst < 0.1);
}
