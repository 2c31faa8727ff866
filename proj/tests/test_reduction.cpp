#include "yamabe/reduction.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace yamabe;
using namespace yamabe::reduction;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("reduced constants") {
    const auto c7 = constants(7);
    CHECK_THAT(c7.c2, WithinRel(4.0 * integrals::K_pow(7) / 35.0, 1e-14));
    CHECK_THAT(c7.c3, WithinRel(integrals::K_pow(7) / 504.0, 1e-14));
    CHECK(c7.gamma == 0);
    CHECK_THAT(constants(10).c3, WithinRel(integrals::K_pow(10) / 5760.0, 1e-14));
    const auto c6 = constants(6);
    CHECK(c6.gamma == 1);
    CHECK_THAT(c6.c2, WithinRel(5.0 / 24.0 * integrals::K_pow(6), 1e-14));
    CHECK_THAT(c6.c3, WithinRel(0.8 * std::pow(std::numbers::pi, 3), 1e-14));
    for (int N = 6; N <= 12; ++N) {
        CHECK(constants(N).c2 > 0.0);
        CHECK(constants(N).c3 > 0.0);
    }
    CHECK_THROWS_AS(constants(5), std::invalid_argument);
}

TEST_CASE("E ratio, tilde E and d_star") {
    CHECK(E_ratio(2.0, 4.0) == 1.0);
    CHECK(std::isinf(E_ratio(1.0, 0.0)));
    CHECK(E_ratio(-1.0, 3.0) == 0.0);
    CHECK(E_ratio(-1.0, 0.0) == 0.0);

    const ReducedConstants c{7, 4.0, 1.0, 0};
    CHECK(tilde_E(3.7, {0.0, 0.0}, c) == 0.0);
    CHECK_THAT(tilde_E(2.0, {2.0, 1.0}, c), WithinRel(16.0, 1e-15));
    CHECK_THAT(d_star({2.0, 1.0}, c), WithinRel(2.0, 1e-15));
    CHECK(std::isinf(d_star({1.0, 0.0}, c)));
    CHECK_THROWS_AS(d_star({0.0, 1.0}, c), std::domain_error);
    CHECK_THROWS_AS(tilde_E(0.0, {1.0, 1.0}, c), std::invalid_argument);

    const PointData a{0.8, 0.3}, b{1.6, 0.3};
    CHECK_THAT(d_star(b, c), WithinRel(std::sqrt(2.0) * d_star(a, c), 1e-14));
    CHECK_THAT(tilde_E(d_star(b, c), b, c), WithinRel(4.0 * tilde_E(d_star(a, c), a, c), 1e-14));
}

TEST_CASE("d_star is the maximizer in d") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (int N = 6; N <= 12; ++N) {
        const auto c = constants(N);
        for (int t = 0; t < 10; ++t) {
            const PointData x{u(rng), u(rng)};
            const double d = d_star(x, c), hstep = 1e-5 * d;
            const double grad = (tilde_E(d + hstep, x, c) - tilde_E(d - hstep, x, c)) / (2 * hstep);
            const double top = tilde_E(d, x, c);
            CHECK(std::abs(grad) <= 1e-8 * std::max(1.0, top / d));
            const double E = E_ratio(x.h, x.W2);
            CHECK_THAT(top, WithinRel(c.c2 * c.c2 / (4 * c.c3) * E * E, 1e-12));
            double prev = 0.0;
            for (int k = 1; k <= 40; ++k) {
                const double v = tilde_E(d * k / 20.0, x, c);
                if (k <= 20)
                    CHECK(v > prev);
                else
                    CHECK(v < prev);
                prev = v;
            }
        }
    }
}

TEST_CASE("l and its inverse") {
    CHECK_THAT(l(0.1), WithinRel(0.0230258509299405, 1e-13));
    CHECK_THAT(mu_of_d(1.0, l(0.1), 6), WithinRel(0.1, 1e-10));
    CHECK_THAT(mu_of_d(2.0, 1e-4, 7), WithinRel(0.02, 1e-15));
    double worst = 0.0;
    for (double lm = std::log(1e-6); lm <= std::log(0.3); lm += 0.05) {
        const double mu = std::exp(lm);
        worst = std::max(worst, std::abs(l_inverse(l(mu)) - mu) / mu);
    }
    CHECK(worst <= 1e-10);
    double prev = 0.0;
    for (double e = 1e-12; e < 0.18; e *= 1.7) {
        const double m = l_inverse(e);
        CHECK(m > prev);
        prev = m;
    }
    CHECK_THROWS_AS(l_inverse(0.19), std::domain_error);
    CHECK_THROWS_AS(l_inverse(0.0), std::domain_error);
    CHECK_THROWS_AS(l(0.7), std::domain_error);
}

TEST_CASE("rescaled functional tends to tilde E") {
    const PointData x{1.3, 0.6};
    for (int N = 7; N <= 10; ++N) {
        const auto c = constants(N);
        for (double d : {0.5, 1.0, 2.0})
            CHECK_THAT(rescaled_functional(d, 1e-6, x, N), WithinRel(tilde_E(d, x, c), 1e-10));
    }
    // N = 6: the ln d / ln l^{-1}(eps) remainder decays like 1/|ln mu|
    const auto c6 = constants(6);
    const double d = 1.5, target = tilde_E(d, x, c6);
    double prev = INFINITY;
    for (double eps : {1e-4, 1e-8, 1e-16, 1e-32, 1e-64}) {
        const double err = std::abs(rescaled_functional(d, eps, x, 6) - target);
        const double bound = 1.01 * c6.c3 * std::pow(d, 4) * x.W2 * std::log(d) / std::abs(std::log(l_inverse(eps)));
        CHECK(err <= bound);
        CHECK(err < prev);
        prev = err;
    }
    CHECK_THAT(rescaled_functional(1.0, 1e-10, x, 6), WithinRel(tilde_E(1.0, x, c6), 1e-10));
}

namespace {

std::size_t brute_argmax(const ReducedEnergyField& f) {
    std::size_t best = 0;
    double bv = -1.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double e = E_ratio(f.h_vals[i], f.W2_vals[i]);
        if (std::isfinite(e) && e > bv) {
            bv = e;
            best = i;
        }
    }
    return best;
}

ReducedEnergyField grid_field(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double cx = 0.6 * u(rng), cy = 0.6 * u(rng), w = 0.5 + 0.5 * std::abs(u(rng));
    ReducedEnergyField f;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x = -1.0 + 2.0 * i / (n - 1), y = -1.0 + 2.0 * j / (n - 1);
            f.coords.push_back({x, y});
            f.h_vals.push_back(std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (w * w)) - 0.2);
            f.W2_vals.push_back(1.0 + 0.5 * (x * x + y * y));
        }
    return f;
}

} // namespace

TEST_CASE("critical set maximizer matches brute force") {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 20; ++t) {
        auto f = grid_field(15, rng);
        const auto cs = find_critical_set(f, constants(7 + t % 4));
        REQUIRE(cs.max_band.size() >= 1);
        CHECK(cs.points[cs.max_band[0]].xi_index == brute_argmax(f));
        for (std::size_t k : cs.max_band) CHECK(cs.points[k].stability_certified);

        // positive rescaling leaves the argmax set unchanged
        auto g = f;
        for (double& h : g.h_vals) h *= 2.0;
        for (double& w : g.W2_vals) w *= 3.0;
        const auto cg = find_critical_set(g, constants(7));
        REQUIRE(cg.max_band.size() == cs.max_band.size());
        CHECK(cg.points[cg.max_band[0]].xi_index == cs.points[cs.max_band[0]].xi_index);
        const auto& p = cs.points[cs.max_band[0]];
        if (t % 4 == 0) CHECK_THAT(cg.points[cg.max_band[0]].d, WithinRel(p.d * std::sqrt(2.0 / 3.0), 1e-13));
    }
}

TEST_CASE("refinement moves toward the continuous maximizer") {
    ReducedEnergyField f;
    for (int i = 0; i < 21; ++i) {
        const double x = -1.0 + 0.1 * i;
        f.coords.push_back({x});
        f.h_vals.push_back(2.0 - (x - 0.137) * (x - 0.137));
        f.W2_vals.push_back(1.0);
    }
    const auto cs = find_critical_set(f, constants(8));
    REQUIRE(cs.max_band.size() == 1);
    CHECK_THAT(cs.points[cs.max_band[0]].refined_coords[0], WithinAbs(0.137, 1e-12));
}

TEST_CASE("critical set edge cases") {
    const auto c = constants(7);
    ReducedEnergyField one{{}, {2.0}, {1.0}};
    const auto s = find_critical_set(one, c);
    REQUIRE(s.points.size() == 1);
    CHECK_THAT(s.points[0].d, WithinRel(d_star({2.0, 1.0}, c), 1e-15));

    ReducedEnergyField flat;
    for (int i = 0; i < 9; ++i) {
        flat.coords.push_back({double(i)});
        flat.h_vals.push_back(1.0 + i);
        flat.W2_vals.push_back((1.0 + i) * (1.0 + i));
    }
    CHECK(find_critical_set(flat, c).max_band.size() == 9);

    ReducedEnergyField none{{}, {-1.0, 0.0}, {1.0, 1.0}};
    CHECK_THROWS_AS(find_critical_set(none, c), NoCompetingPointsError);
    ReducedEnergyField flat_w{{}, {1.0, 2.0}, {0.0, 0.0}};
    CHECK_THROWS_AS(find_critical_set(flat_w, c), NoCompetingPointsError);
    ReducedEnergyField mixed{{}, {1.0, 2.0, 1.0}, {0.0, 1.0, 1.0}};
    const auto m = find_critical_set(mixed, c);
    CHECK(m.infinite_points == std::vector<std::size_t>{0});
    CHECK(m.points[m.max_band[0]].xi_index == 1);
    ReducedEnergyField bad{{}, {1.0}, {-1.0}};
    CHECK_THROWS_AS(find_critical_set(bad, c), std::invalid_argument);
}

TEST_CASE("saddles are reported but not certified") {
    ReducedEnergyField f;
    for (int i = -3; i <= 3; ++i)
        for (int j = -3; j <= 3; ++j) {
            f.coords.push_back({double(i), double(j)});
            // maximum along x, minimum along y at the origin; global max sits on the edge
            f.h_vals.push_back(10.0 - i * i + 0.5 * j * j);
            f.W2_vals.push_back(1.0);
        }
    const auto cs = find_critical_set(f, constants(7));
    bool saw = false;
    for (const auto& p : cs.points)
        if (p.kind == Kind::saddle) {
            saw = true;
            CHECK_FALSE(p.stability_certified);
        }
    CHECK(saw);
    CHECK(std::string(kind_name(Kind::saddle)) == "saddle");
}

TEST_CASE("blow-up report") {
    const auto c = constants(7);
    // choose h so that d_star = 2 with W2 = 1: h = 8 c3 / c2
    ReducedEnergyField f{{}, {8.0 * c.c3 / c.c2, 0.1 * c.c3 / c.c2}, {1.0, 1.0}};
    const auto r = blowup_report(f, {1e-2, 1e-4, 1e-6}, 7);
    REQUIRE(r.records.size() == 3);
    const auto& p = r.records[1].points.at(0);
    CHECK(p.xi_index == 0);
    CHECK_THAT(p.d, WithinRel(2.0, 1e-14));
    CHECK_THAT(p.mu, WithinRel(0.02, 1e-14));
    CHECK_THAT(p.peak, WithinRel(std::pow(0.02, -2.5) * std::pow(35.0, 1.25), 1e-13));
    CHECK(r.records[0].points[0].peak < r.records[1].points[0].peak);
    CHECK(r.records[1].points[0].peak < r.records[2].points[0].peak);
    CHECK_THROWS_AS(blowup_report(f, {-1.0}, 7), std::invalid_argument);
}
