#include "yamabe/quadrature.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace yamabe;
using Catch::Matchers::WithinRel;

TEST_CASE("Kronrod rule is exact for degree 20 polynomials") {
    const auto r = quad::integrate([](double x) { return std::pow(x, 20); }, -1.0, 1.0);
    CHECK_THAT(r.value, WithinRel(2.0 / 21.0, 1e-14));
}

TEST_CASE("adaptive refinement handles endpoint singularities") {
    const auto r = quad::integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0);
    CHECK_THAT(r.value, WithinRel(2.0, 1e-10));
}

TEST_CASE("vector integrands meet per-component tolerances") {
    auto f = [](double x, double* o) {
        o[0] = std::sin(x);
        o[1] = 1e-6 * std::exp(x);
    };
    const auto r = quad::integrate_many(f, 2, 0.0, std::numbers::pi);
    CHECK_THAT(r[0].value, WithinRel(2.0, 1e-12));
    CHECK_THAT(r[1].value, WithinRel(1e-6 * (std::exp(std::numbers::pi) - 1.0), 1e-10));
}

TEST_CASE("semi-infinite and log-mapped ranges") {
    CHECK_THAT(quad::integrate_log_from([](double x) { return std::pow(x, -1.1); }, 1.0).value, WithinRel(10.0, 1e-10));
    CHECK_THAT(quad::integrate_from([](double x) { return std::exp(-x); }, 0.0).value, WithinRel(1.0, 1e-10));
    CHECK_THAT(quad::integrate_log([](double x) { return 1.0 / x; }, 1.0, 1e8).value, WithinRel(8.0 * std::log(10.0), 1e-12));
    CHECK_THAT(quad::integrate_radial([](double x) { return 1.0 / (1.0 + x * x); }, INFINITY).value,
               WithinRel(std::numbers::pi / 2, 1e-11));
}

TEST_CASE("non-convergence raises") {
    quad::Options opt;
    opt.max_intervals = 3;
    opt.rel_tol = 1e-15;
    opt.abs_tol = 0.0;
    CHECK_THROWS_AS(quad::integrate([](double x) { return std::sin(1.0 / x); }, 1e-3, 1.0, opt), QuadratureError);
}

TEST_CASE("Gauss-Legendre rule") {
    const auto g = quad::gauss_legendre(8);
    double s = 0.0, w = 0.0;
    for (int i = 0; i < 8; ++i) {
        s += g.weights[i] * std::pow(g.nodes[i], 14);
        w += g.weights[i];
    }
    CHECK_THAT(w, WithinRel(2.0, 1e-14));
    CHECK_THAT(s, WithinRel(2.0 / 15.0, 1e-13));
}

TEST_CASE("tolerance floor relative to the integral of |f|") {
    // sin over many periods integrates to ~0; a pure relative tolerance cannot be met
    auto f = [](double x) { return std::sin(x); };
    quad::Options strict;
    strict.abs_tol = 0.0;
    strict.rel_tol = 1e-12;
    strict.max_intervals = 200;
    CHECK_THROWS_AS(quad::integrate(f, 0.0, 20 * std::numbers::pi, strict), QuadratureError);
    quad::Options floored = strict;
    floored.abs_scale_floor = 1e-13;
    const auto r = quad::integrate(f, 0.0, 20 * std::numbers::pi, floored);
    CHECK(std::abs(r.value) < 1e-10);
}

TEST_CASE("per-component absolute tolerances") {
    auto f = [](double x, double* o) {
        o[0] = std::sin(x);
        o[1] = std::sin(x);
    };
    quad::Options opt;
    opt.abs_tol = 0.0;
    opt.rel_tol = 1e-12;
    opt.max_intervals = 200;
    opt.component_abs_tol = {1e-9, 1e-9};
    const auto r = quad::integrate_many(f, 2, 0.0, 20 * std::numbers::pi, opt);
    CHECK(std::abs(r[0].value) < 1e-9);
    opt.component_abs_tol = {1e-9};
    CHECK_THROWS_AS(quad::integrate_many(f, 2, 0.0, 20 * std::numbers::pi, opt), QuadratureError);
}

TEST_CASE("failure message names the worst component") {
    quad::Options opt;
    opt.max_intervals = 3;
    opt.rel_tol = 1e-15;
    opt.abs_tol = 0.0;
    auto f = [](double x, double* o) {
        o[0] = x;
        o[1] = std::sin(1.0 / x);
    };
    try {
        quad::integrate_many(f, 2, 1e-3, 1.0, opt);
        FAIL("expected a quadrature failure");
    } catch (const QuadratureError& e) {
        CHECK(std::string(e.what()).find("worst component 1") != std::string::npos);
    }
}
