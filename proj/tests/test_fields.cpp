#include <cmath>
#include <numbers>

#include "doctest.h"
#include "wavelab/fields.hpp"

using namespace wavelab;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("centered difference of a Fourier mode has the exact discrete symbol") {
    const int N = 32;
    auto g = PeriodicGrid::make({N});
    const double h = 2.0 * pi / N;
    const auto u = GridFunction::sample(g, [](const Point& x) { return std::sin(3.0 * x[0]); });
    const auto d = diff(u, 0, DiffScheme::centered2);
    const double symbol = std::sin(3.0 * h) / h;
    for (std::size_t n = 0; n < u.size(); ++n) {
        CHECK(d[n] == doctest::Approx(symbol * std::cos(3.0 * g->node_position(n)[0])).epsilon(1e-12));
    }
}

TEST_CASE("one-sided differences") {
    auto g = PeriodicGrid::make({16});
    const double h = g->spacing(0);
    const auto u = GridFunction::sample(g, [](const Point& x) { return std::cos(x[0]); });
    const auto f = diff(u, 0, DiffScheme::forward1);
    const auto b = diff(u, 0, DiffScheme::backward1);
    CHECK(f[0] == doctest::Approx((std::cos(h) - 1.0) / h));
    CHECK(b[0] == doctest::Approx((1.0 - std::cos(h)) / h));
}

TEST_CASE("flux divergence on the flat metric is the three-point Laplacian") {
    const int N = 40;
    auto g = PeriodicGrid::make({N});
    const double h = 2.0 * pi / N;
    const auto e = catalog("flat1d");
    const auto u = GridFunction::sample(g, [](const Point& x) { return std::sin(2.0 * x[0]); });
    const auto L = dalembertian_spatial(u, e.metric, 0.0);
    const double symbol = -4.0 * std::sin(h) * std::sin(h) / (h * h);
    for (std::size_t n = 0; n < u.size(); ++n) CHECK(L[n] == doctest::Approx(symbol * u[n]).epsilon(1e-10));
}

TEST_CASE("flux divergence in two dimensions is exact on quadratic-free data and second order") {
    const auto e = catalog("flat2d");
    double prev = 0.0;
    for (int N : {16, 32}) {
        auto g = PeriodicGrid::make({N, N});
        const auto u = GridFunction::sample(g, [](const Point& x) { return std::sin(x[0] + 2.0 * x[1]); });
        const auto L = dalembertian_spatial(u, e.metric, 0.0);
        double err = 0.0;
        for (std::size_t n = 0; n < u.size(); ++n) err = std::max(err, std::abs(L[n] + 5.0 * u[n]));
        if (prev > 0.0) CHECK(std::log2(prev / err) == doctest::Approx(2.0).epsilon(0.05));
        prev = err;
    }
}

TEST_CASE("variable coefficient divergence form converges to the analytic operator") {
    const auto e = catalog("smooth1d");
    auto exact = [](double x) {
        // d/dx ((1 + sin^2 x / 2) cos x) for u = sin x
        const double s = std::sin(x), c = std::cos(x);
        return s * c * c - (1.0 + 0.5 * s * s) * s;
    };
    double prev = 0.0;
    for (int N : {64, 128}) {
        auto g = PeriodicGrid::make({N});
        const auto u = GridFunction::sample(g, [](const Point& x) { return std::sin(x[0]); });
        const auto L = dalembertian_spatial(u, e.metric, 0.0);
        double err = 0.0;
        for (std::size_t n = 0; n < u.size(); ++n) err = std::max(err, std::abs(L[n] - exact(g->node_position(n)[0])));
        if (prev > 0.0) CHECK(std::log2(prev / err) == doctest::Approx(2.0).epsilon(0.05));
        prev = err;
    }
}

TEST_CASE("ellipticity envelope of the catalog metrics") {
    auto g = PeriodicGrid::make({64});
    const auto s = validate_ellipticity(catalog("smooth1d").metric, *g, {-1.0, 1.0}, 5);
    CHECK(s.lower == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(s.upper == doctest::Approx(1.5).epsilon(1e-3));
    const auto f = validate_ellipticity(catalog("flat1d").metric, *g, {-1.0, 1.0}, 3);
    CHECK(f.lower == doctest::Approx(1.0));
    CHECK(f.upper == doctest::Approx(1.0));
}

TEST_CASE("manufactured sources agree with finite differences of the exact solution") {
    for (const char* name : {"smooth1d", "lipschitz1d", "c1_1d"}) {
        const auto e = catalog(name);
        REQUIRE(e.exact.has_value());
        const double d = 1e-4;
        for (double t : {-0.5, 0.3}) {
            for (double x : {0.4, 1.3, 2.2, 4.0, 5.5}) {
                auto u = [&](double tt, double xx) { return e.exact->u(tt, Point{xx, 0.0}); };
                auto g = [&](double tt, double xx) { return e.metric(tt, Point{xx, 0.0}).xx; };
                const double utt = (u(t + d, x) - 2.0 * u(t, x) + u(t - d, x)) / (d * d);
                const double flux_p = g(t, x + 0.5 * d) * (u(t, x + d) - u(t, x)) / d;
                const double flux_m = g(t, x - 0.5 * d) * (u(t, x) - u(t, x - d)) / d;
                const double ut = (u(t + d, x) - u(t - d, x)) / (2.0 * d);
                const double ux = (u(t, x + d) - u(t, x - d)) / (2.0 * d);
                const Point p{x, 0.0};
                const double l1 = (e.op.b0.is_zero() ? 0.0 : e.op.b0.f(t, p) * ut) +
                                  (e.op.b[0].is_zero() ? 0.0 : e.op.b[0].f(t, p) * ux) +
                                  (e.op.c.is_zero() ? 0.0 : e.op.c.f(t, p) * u(t, x));
                const double f = utt - (flux_p - flux_m) / d + l1;
                CHECK(e.exact->f(t, p) == doctest::Approx(f).epsilon(1e-5));
            }
        }
    }
}

TEST_CASE("non-divergence form of smooth1d") {
    const auto e = catalog("smooth1d");
    auto g = PeriodicGrid::make({256});
    const auto nd = to_nondivergence_form(e.metric, e.op, *g);
    CHECK_FALSE(nd.approximate_derivative);
    for (double x : {0.3, 1.7, 4.1}) {
        // p = -d_x g + b = -sin x cos x + 0.2 cos x
        const double p = -std::sin(x) * std::cos(x) + 0.2 * std::cos(x);
        CHECK(nd.op.b[0].f(0.0, Point{x, 0.0}) == doctest::Approx(p).epsilon(1e-6));
    }
}

TEST_CASE("catalog") {
    CHECK(catalog_names().size() == 5);
    CHECK_THROWS_AS(catalog("nope"), WavelabError);
    CHECK(catalog("lipschitz1d").metric.regularity() == Regularity::lipschitz);
    CHECK(catalog("flat2d").dim == 2);
}
