#pragma once

// Closed-form expansions of J_eps at the bubble and at the corrected ansatz,
// as coefficient vectors over {1, mu^2, mu^4, mu^4 ln mu, eps mu^2}.
// For N = 6 the mu^4 coefficient is indeterminate and stored as NaN.

#include "yamabe/curvature.hpp"
#include "yamabe/integrals.hpp"
#include "yamabe/polynomial.hpp"
#include "yamabe/profiles.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace yamabe::energy {

using curvature::LocalGeometry;

inline constexpr double indeterminate = std::numeric_limits<double>::quiet_NaN();

struct EnergyExpansion {
    double c_const = 0.0;
    double c_mu2 = 0.0;
    double c_mu4 = 0.0;
    double c_mu4log = 0.0;
    double c_eps_mu2 = 0.0;

    bool mu4_determinate() const { return !std::isnan(c_mu4); }

    // Indeterminate coefficients contribute nothing.
    double evaluate(double mu, double eps) const {
        auto v = [](double c) { return std::isnan(c) ? 0.0 : c; };
        const double m2 = mu * mu, m4 = m2 * m2;
        return v(c_const) + v(c_mu2) * m2 + v(c_mu4) * m4 + v(c_mu4log) * m4 * std::log(mu) + v(c_eps_mu2) * eps * m2;
    }

    EnergyExpansion& operator+=(const EnergyExpansion& o) {
        c_const += o.c_const;
        c_mu2 += o.c_mu2;
        c_mu4 += o.c_mu4;
        c_mu4log += o.c_mu4log;
        c_eps_mu2 += o.c_eps_mu2;
        return *this;
    }
    EnergyExpansion& operator*=(double s) {
        c_const *= s;
        c_mu2 *= s;
        c_mu4 *= s;
        c_mu4log *= s;
        c_eps_mu2 *= s;
        return *this;
    }
    friend EnergyExpansion operator+(EnergyExpansion a, const EnergyExpansion& b) { return a += b; }
    friend EnergyExpansion operator*(double s, EnergyExpansion a) { return a *= s; }
};

namespace detail {
inline void require_branch(const LocalGeometry& g) {
    if (g.dims.N < 6) throw std::invalid_argument("expansions are stated for N >= 6, got " + std::to_string(g.dims.N));
}
// 4(N-1)/(N(N-2)(N-4))
inline double potential_factor(double N) { return 4.0 * (N - 1) / (N * (N - 2) * (N - 4)); }
} // namespace detail

// int |grad U_mu|^2 dv_g
inline EnergyExpansion grad_term(const LocalGeometry& g) {
    detail::require_branch(g);
    const int N = g.dims.N;
    const double n = N, K = integrals::K_pow(N), A = curvature::a_g(g);
    EnergyExpansion e;
    e.c_const = K;
    e.c_mu2 = -(n + 2) / (6 * n * (n - 4)) * g.S * K;
    if (N == 6) {
        e.c_mu4 = indeterminate;
        e.c_mu4log = -9216.0 * integrals::omega(5) * A;
    } else {
        e.c_mu4 = (n + 2) * (n + 4) / ((n - 4) * (n - 6)) * A * K;
    }
    return e;
}

// int S_g U_mu^2 dv_g
inline EnergyExpansion scalar_term(const LocalGeometry& g) {
    detail::require_branch(g);
    const int N = g.dims.N;
    const double n = N, K = integrals::K_pow(N), L = curvature::lambda_g(g);
    EnergyExpansion e;
    e.c_mu2 = detail::potential_factor(n) * K * g.S;
    if (N == 6) {
        e.c_mu4 = indeterminate;
        e.c_mu4log = 48.0 * integrals::omega(5) * L;
    } else {
        e.c_mu4 = -1.0 / (2 * (n - 6)) * detail::potential_factor(n) * K * L;
    }
    return e;
}

// int h U_mu^2 dv_g, recorded against eps mu^2 (the eps factor of J is included)
inline EnergyExpansion h_term(const LocalGeometry& g) {
    detail::require_branch(g);
    EnergyExpansion e;
    e.c_eps_mu2 = detail::potential_factor(g.dims.N) * integrals::K_pow(g.dims.N) * g.h;
    return e;
}

// int U_mu^{2*} dv_g
inline EnergyExpansion critical_term(const LocalGeometry& g) {
    detail::require_branch(g);
    const double n = g.dims.N, K = integrals::K_pow(g.dims.N), A = curvature::a_g(g);
    EnergyExpansion e;
    e.c_const = K;
    e.c_mu2 = -g.S / (6 * (n - 2)) * K;
    e.c_mu4 = n * (n + 2) / ((n - 2) * (n - 4)) * A * K;
    return e;
}

// J_eps(U_mu) = 1/2 grad + 1/2 alpha_N scalar + 1/2 eps h - 1/2* critical
inline EnergyExpansion bubble_energy(const LocalGeometry& g) {
    detail::require_branch(g);
    return 0.5 * grad_term(g) + (0.5 * g.dims.alpha_N) * scalar_term(g) + 0.5 * h_term(g) +
           (-1.0 / g.dims.two_star) * critical_term(g);
}

struct CorrectionEnergy {
    double quadrature = 0.0;
    // Closed form: closed_const + closed_log * ln mu; closed_const is NaN for N = 6.
    double closed_const = 0.0;
    double closed_log = 0.0;

    double closed(double mu) const { return (std::isnan(closed_const) ? 0.0 : closed_const) + closed_log * std::log(mu); }
};

inline CorrectionEnergy correction_closed_form(const LocalGeometry& g) {
    detail::require_branch(g);
    const int N = g.dims.N;
    const double n = N, E2 = g.E_norm_sq, S2 = g.S * g.S;
    CorrectionEnergy c;
    if (N == 6) {
        const double w5 = integrals::omega(5);
        c.closed_const = indeterminate;
        c.closed_log = 8.0 / 3.0 * w5 * E2 + 16.0 / 225.0 * w5 * S2;
    } else {
        const double K = integrals::K_pow(N);
        c.closed_const = -(2 * n - 7) / (9 * n * (n - 2) * (n - 4) * (n - 6)) * K * E2 +
                         (n - 2) * (n - 7) / (36 * n * n * (n - 1) * (n - 4) * (n - 6)) * K * S2;
    }
    return c;
}

// int_{B(r0/(2 mu))} (Delta V + p U^{p-1} V) V dy by the angular-moment reduction,
// with the analytic Laplacian of V; plus the closed form.
inline CorrectionEnergy correction_energy(const LocalGeometry& g, double mu, const quad::Options& opt = {}) {
    detail::require_branch(g);
    if (!(mu > 0.0) || !(mu < g.dims.r0 / 4)) throw std::invalid_argument("mu must lie in (0, r0/4)");
    const int N = g.dims.N;
    const double S = g.S, R = g.dims.r0 / (2.0 * mu);
    std::vector<double> ric(std::size_t(N) * N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) ric[std::size_t(i) * N + j] = g.ric(i, j);
    const Polynomial Q = Polynomial::quadratic_form(N, ric);
    const Polynomial one = Polynomial::constant(N, 1.0);
    // (Delta V + k V) V with V = aQ + b, Delta V = Q L1 + L0.
    auto parts = [N, S](double r) {
        const double s = r * r;
        const auto c = profiles::correction_coeffs(s, N, S);
        const double k = profiles::linearized_potential(s, N);
        const double L1 = 2.0 * N * c.a1 + 4.0 * s * c.a2 + 8.0 * c.a1 + k * c.a;
        const double L0 = 2.0 * S * c.a + 2.0 * N * c.b1 + 4.0 * s * c.b2 + k * c.b;
        return std::array<double, 3>{L1 * c.a, L1 * c.b + L0 * c.a, L0 * c.b};
    };
    CorrectionEnergy out = correction_closed_form(g);
    out.quadrature = integrals::ball_integral([&](double r) { return parts(r)[0]; }, Q * Q, R, N, opt) +
                     integrals::ball_integral([&](double r) { return parts(r)[1]; }, Q, R, N, opt) +
                     integrals::ball_integral([&](double r) { return parts(r)[2]; }, one, R, N, opt);
    return out;
}

// J_eps(U_mu + mu^2 V_mu) = J_eps(U_mu) + 1/2 mu^4 int (Delta V + p U^{p-1} V) V
inline EnergyExpansion total_energy(const LocalGeometry& g) {
    EnergyExpansion e = bubble_energy(g);
    const auto c = correction_closed_form(g);
    if (g.dims.N == 6)
        e.c_mu4log += 0.5 * c.closed_log;
    else
        e.c_mu4 += 0.5 * c.closed_const;
    return e;
}

} // namespace yamabe::energy
