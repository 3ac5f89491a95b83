#include <cmath>
#include <numbers>

#include "doctest.h"
#include "wavelab/grid.hpp"

using namespace wavelab;

TEST_CASE("grid geometry and periodic indexing") {
    auto g = PeriodicGrid::make({8, 8}, {2.0, 2.0});
    CHECK(g->dim() == 2);
    CHECK(g->size() == 64);
    CHECK(g->spacing(0) == doctest::Approx(0.25));
    CHECK(g->spacing(1) == doctest::Approx(0.25));
    CHECK(g->cell_volume() == doctest::Approx(0.0625));
    CHECK(g->index(-1, 0) == g->index(7, 0));
    CHECK(g->index(0, 9) == g->index(0, 1));
    const std::size_t n = g->index(3, 2);
    CHECK(g->shift(n, 0, 6) == g->index(1, 2));
    CHECK(g->shift(n, 1, -3) == g->index(3, 7));
    const Point x = g->node_position(n);
    CHECK(x[0] == doctest::Approx(0.75));
    CHECK(x[1] == doctest::Approx(0.5));
    const Point c = g->cell_center(n);
    CHECK(c[0] == doctest::Approx(0.875));
    CHECK(c[1] == doctest::Approx(0.625));
    CHECK(g->wrap_displacement(0, 1.75) == doctest::Approx(-0.25));
}

TEST_CASE("default circumference is 2 pi") {
    auto g = PeriodicGrid::make({16});
    CHECK(g->circumference(0) == doctest::Approx(2.0 * std::numbers::pi));
    CHECK(g->unit_density());
}

TEST_CASE("grid function arithmetic") {
    auto g = PeriodicGrid::make({8});
    GridFunction a(g, 2.0), b(g, 3.0);
    const GridFunction c = a + 2.0 * b - b;
    CHECK(c[5] == doctest::Approx(5.0));
    CHECK(a.times(b)[0] == doctest::Approx(6.0));
    CHECK(c.max_abs() == doctest::Approx(5.0));
    auto other = PeriodicGrid::make({16});
    CHECK_THROWS_AS(a + GridFunction(other, 1.0), WavelabError);
}

TEST_CASE("trapezoidal integration is exact for low trigonometric modes") {
    auto g = PeriodicGrid::make({32});
    const auto f = GridFunction::sample(g, [](const Point& x) { return std::sin(3.0 * x[0]) * std::sin(3.0 * x[0]); });
    CHECK(integrate(f) == doctest::Approx(std::numbers::pi).epsilon(1e-12));
}

TEST_CASE("density weights integration") {
    auto g = PeriodicGrid::make({64}, {}, [](const Point& x) { return 2.0 + std::cos(x[0]); });
    const GridFunction one(g, 1.0);
    CHECK(integrate(one) == doctest::Approx(4.0 * std::numbers::pi).epsilon(1e-12));
    CHECK(integrate_lebesgue(one) == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-12));
}
