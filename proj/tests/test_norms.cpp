#include <cmath>
#include <numbers>

#include "doctest.h"
#include "wavelab/norms.hpp"

using namespace wavelab;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("discrete energy of a Fourier mode") {
    const int N = 50;
    auto g = PeriodicGrid::make({N});
    const double h = 2.0 * pi / N;
    const auto e = catalog("flat1d");
    StateVector s{GridFunction::sample(g, [](const Point& x) { return std::sin(x[0]); }),
                  GridFunction::sample(g, [](const Point& x) { return 2.0 * std::cos(x[0]); }), 0.0};
    const double forward = 2.0 * std::sin(0.5 * h) / h;
    const double expected = pi + 4.0 * pi + pi * forward * forward;
    CHECK(energy(s, e.metric) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("hk norms") {
    auto g = PeriodicGrid::make({64});
    const double h = g->spacing(0);
    const auto u = GridFunction::sample(g, [](const Point& x) { return std::cos(2.0 * x[0]); });
    CHECK(hk_norm(u, 0) == doctest::Approx(std::sqrt(pi)).epsilon(1e-12));
    const double forward = 2.0 * std::sin(h) / h;
    CHECK(hk_norm(u, 1) == doctest::Approx(std::sqrt(pi * (1.0 + forward * forward))).epsilon(1e-12));
    CHECK_THROWS_AS(hk_norm(u, 3), WavelabError);
}

TEST_CASE("K1 for the flat metric without lower-order terms is one") {
    auto g = PeriodicGrid::make({64});
    const auto e = catalog("flat1d");
    CHECK(k1_bound(e.metric, e.op, *g, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("K1 grows with the lower-order terms") {
    auto g = PeriodicGrid::make({128});
    const auto e = catalog("smooth1d");
    const K1Terms t = k1_terms(e.metric, e.op, *g, 1.0);
    CHECK(t.b0 == doctest::Approx(0.1));
    CHECK(t.c == doctest::Approx(0.3));
    CHECK(t.b == doctest::Approx(0.2).epsilon(1e-3));
    CHECK(t.div_metric == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(t.total > 1.0);
}

TEST_CASE("K1 rejects intervals outside the metric window") {
    auto g = PeriodicGrid::make({32});
    const auto e = catalog("c1_1d");
    CHECK_THROWS_AS(k1_terms(e.metric, e.op, *g, 2.0), WavelabError);
}
