#pragma once

// Radial integral calculus I_p^q = int_0^T r^q (1+r)^-p dr, sphere volumes,
// the Sobolev constant K_N^-N and sphere moments.

#include "yamabe/errors.hpp"
#include "yamabe/polynomial.hpp"
#include "yamabe/quadrature.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace yamabe::integrals {

struct Truncation {
    double mu = 0.0;
    double r0 = 1.0;
    double upper() const { return r0 * r0 / (4.0 * mu * mu); }
};

namespace detail {
inline double gamma_ratio(double a, double b, double c) {
    // Gamma(a) Gamma(b) / Gamma(c)
    if (a < 170.0 && b < 170.0 && c < 170.0) return std::tgamma(a) * std::tgamma(b) / std::tgamma(c);
    return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(c));
}
} // namespace detail

inline bool is_proper(double q, double p) { return p - q > 1.0; }

// Beta closed form of the proper integral.
inline double I_beta(double q, double p) {
    if (!(q >= 0.0) || !(p > 0.0)) throw std::invalid_argument("I needs q >= 0 and p > 0");
    if (!is_proper(q, p))
        throw DivergentIntegralError("I(" + std::to_string(q) + ", " + std::to_string(p) +
                                     ") diverges: p - q <= 1 and no truncation given");
    return detail::gamma_ratio(q + 1.0, p - q - 1.0, p);
}

// Proper integral by adaptive quadrature in r = e^u, where both tails decay
// exponentially.
inline double I_quadrature(double q, double p, const quad::Options& opt = {}) {
    if (!is_proper(q, p)) throw DivergentIntegralError("proper quadrature requested for p - q <= 1");
    auto f = [q, p](double u) {
        const double softplus = u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
        return std::exp((q + 1.0) * u - p * softplus);
    };
    const double lo = -45.0 / (q + 1.0), hi = 45.0 / (p - q - 1.0);
    return quad::integrate(f, lo, hi, opt).value;
}

// Truncated integral over [0, upper] by adaptive quadrature.
inline double I_truncated(double q, double p, double upper, const quad::Options& opt = {}) {
    if (!(upper > 0.0)) throw std::invalid_argument("truncation limit must be positive");
    auto f = [q, p](double r) { return std::pow(r, q) * std::pow(1.0 + r, -p); };
    return quad::integrate_radial(f, upper, opt).value;
}

// I(q, p): Beta closed form when proper, otherwise truncated at r0^2/(4 mu^2).
inline double I(double q, double p, std::optional<Truncation> trunc = std::nullopt) {
    if (!(q >= 0.0) || !(p > 0.0)) throw std::invalid_argument("I needs q >= 0 and p > 0");
    if (is_proper(q, p)) return I_beta(q, p);
    if (!trunc) return I_beta(q, p); // throws the divergence error
    if (!(trunc->mu > 0.0) || !(trunc->r0 > 0.0)) throw std::invalid_argument("truncation needs mu, r0 > 0");
    return I_truncated(q, p, trunc->upper());
}

enum class Direction { raise_p, raise_both };

// raise_p:    I(q, p+1)   = (p-q-1)/p       * I(q, p)
// raise_both: I(q+1, p+1) = (q+1)/(p-q-1)   * I(q, p+1)
inline double recurrence_step(double q, double p, Direction dir) {
    if (!is_proper(q, p))
        throw std::domain_error("integration-by-parts identity needs p - q > 1, got p - q = " + std::to_string(p - q));
    if (dir == Direction::raise_p) return (p - q - 1.0) / p * I_beta(q, p);
    return (q + 1.0) / (p - q - 1.0) * I_beta(q, p + 1.0);
}

struct ClosedChain {
    int N = 0;
    double I_half = 0.0;  // I_N^{N/2}
    double I_below = 0.0; // I_N^{(N-2)/2}
    double I_above = 0.0; // I_N^{(N+2)/2}
    double defect_below = 0.0; // |I_half - N/(N-2) I_below| / I_half
    double defect_above = 0.0; // |I_half - (N-4)/(N+2) I_above| / I_half
    double top_ratio = std::numeric_limits<double>::quiet_NaN();
    double I_top = std::numeric_limits<double>::quiet_NaN(); // I_N^{(N+4)/2}, N >= 7
    std::vector<double> mus, truncated;                       // N = 6 only
    double log_slope = std::numeric_limits<double>::quiet_NaN();
};

inline ClosedChain closed_chain(int N, double r0 = 1.0, std::vector<double> mus = {1e-3, 1e-4, 1e-5}) {
    if (N < 6) throw std::invalid_argument("closed chain needs N >= 6");
    ClosedChain c;
    c.N = N;
    const double n = N;
    c.I_half = I_beta(n / 2, n);
    c.I_below = I_beta((n - 2) / 2, n);
    c.I_above = I_beta((n + 2) / 2, n);
    c.defect_below = std::abs(c.I_half - n / (n - 2) * c.I_below) / c.I_half;
    c.defect_above = std::abs(c.I_half - (n - 4) / (n + 2) * c.I_above) / c.I_half;
    if (N >= 7) {
        c.top_ratio = (n + 2) * (n + 4) / ((n - 4) * (n - 6));
        c.I_top = I_beta((n + 4) / 2, n);
        return c;
    }
    // N = 6: I_6^5 diverges logarithmically; fit its slope against ln(1/mu).
    c.mus = mus;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (double mu : mus) {
        const double v = I(5.0, 6.0, Truncation{mu, r0});
        c.truncated.push_back(v);
        const double x = -std::log(mu);
        sx += x;
        sy += v;
        sxx += x * x;
        sxy += x * v;
    }
    const double m = double(mus.size());
    c.log_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return c;
}

// Volume of the unit n-sphere.
inline double omega(int n) {
    if (n < 1) throw std::invalid_argument("omega needs n >= 1");
    const double a = 0.5 * (n + 1);
    return 2.0 * std::pow(std::numbers::pi, a) / std::tgamma(a);
}

// K_N^{-N} = [N(N-2)]^{(N-2)/2} (N-2)^2 omega_{N-1} I_N^{N/2} / 2
inline double K_pow(int N) {
    if (N < 3) throw std::invalid_argument("K_pow needs N >= 3");
    const double n = N;
    return std::pow(n * (n - 2), (n - 2) / 2) * (n - 2) * (n - 2) * omega(N - 1) * I_beta(n / 2, n) / 2.0;
}

// The same constant with I_N^{N/2} = N omega_N / (2^{N-1} (N-2) omega_{N-1}).
inline double K_pow_alt(int N) {
    if (N < 3) throw std::invalid_argument("K_pow needs N >= 3");
    const double n = N;
    return std::pow(n * (n - 2), (n - 2) / 2) * (n - 2) * (n - 2) / 2.0 * n * omega(N) /
           (std::pow(2.0, n - 1) * (n - 2));
}

// int_{S^{N-1}} prod y_i^{alpha_i}
inline double angular_moment(const std::vector<int>& alpha, int N) {
    if (int(alpha.size()) > N) throw std::invalid_argument("multi-index longer than the dimension");
    int total = 0;
    double num = 1.0;
    for (int a : alpha) {
        if (a < 0) throw std::invalid_argument("multi-index entries must be >= 0");
        if (a % 2 == 1) return 0.0;
        for (int k = a - 1; k > 0; k -= 2) num *= k;
        total += a;
    }
    double den = 1.0;
    for (int k = 0; k < total; k += 2) den *= (N + k);
    return omega(N - 1) * num / den;
}

inline double angular_integral(const Polynomial& P, int N) {
    if (P.nvars() > N) throw std::invalid_argument("polynomial has more variables than the dimension");
    double s = 0.0;
    for (const auto& [key, c] : P.terms()) s += c * angular_moment(Polynomial::unpack(key, P.nvars()), N);
    return s;
}

// int_{B(R)} radial(|y|) P(y) dy, with R possibly infinite.
template <class F>
double ball_integral(F radial, const Polynomial& P, double R, int N, const quad::Options& opt = {}) {
    if (P.total_degree() > 8) throw std::invalid_argument("ball_integral supports polynomial degree <= 8");
    std::map<int, double> by_degree;
    for (const auto& [key, c] : P.terms()) {
        const double m = c * angular_moment(Polynomial::unpack(key, P.nvars()), N);
        if (m != 0.0) by_degree[Polynomial::degree_of(key)] += m;
    }
    if (by_degree.empty()) return 0.0;
    std::vector<int> degs;
    std::vector<double> weights;
    for (const auto& [d, w] : by_degree) {
        degs.push_back(d);
        weights.push_back(w);
    }
    auto f = [&](double r, double* out) {
        const double base = radial(r);
        for (std::size_t k = 0; k < degs.size(); ++k) out[k] = base == 0.0 ? 0.0 : std::pow(r, N - 1 + degs[k]) * base;
    };
    const auto res = quad::integrate_many_radial(f, degs.size(), R, opt);
    double s = 0.0;
    for (std::size_t k = 0; k < degs.size(); ++k) s += weights[k] * res[k].value;
    return s;
}

} // namespace yamabe::integrals
