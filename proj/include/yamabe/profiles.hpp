#pragma once

// Bubble U, correction V, kernel functions and the cut-off ansatz.
// Euclidean side: Delta = sum of second partials (analyst's sign).
//
// Radial functions are handled through s = |y|^2: for f(y) = phi(s),
//   grad f = 2 phi' y,   Hess f = 4 phi'' y y^T + 2 phi' I,   Delta f = 2N phi' + 4 s phi''.

#include "yamabe/curvature.hpp"
#include "yamabe/dimension.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace yamabe::profiles {

using curvature::LocalGeometry;

template <class Real = double>
struct RadialEval {
    Real value;
    Real d_dr;
    Real laplacian;
};

// [N(N-2)]^{(N-2)/4} = U(0)
inline double bubble_peak(int N) { return std::pow(double(N) * (N - 2), (N - 2) / 4.0); }

// phi(s) = U at |y|^2 = s with first and second s-derivatives.
template <class Real>
struct SJet {
    Real f, f1, f2;
};

template <class Real>
SJet<Real> bubble_jet(Real s, int N) {
    const Real m = Real(N - 2) / 2;
    const Real C = std::pow(Real(N) * Real(N - 2), Real(N - 2) / 4);
    const Real base = std::pow(Real(1) + s, -m);
    const Real inv = Real(1) / (Real(1) + s);
    return {C * base, -m * C * base * inv, m * (m + 1) * C * base * inv * inv};
}

template <class Real = double>
RadialEval<Real> eval_U(Real r, const DimensionParams& dims) {
    if (r < Real(0)) throw std::invalid_argument("radius must be >= 0");
    const Real s = r * r;
    const auto j = bubble_jet(s, dims.N);
    return {j.f, 2 * r * j.f1, 2 * Real(dims.N) * j.f1 + 4 * s * j.f2};
}

// p U^{p-1} = N(N+2) / (1+s)^2
template <class Real>
Real linearized_potential(Real s, int N) {
    return Real(N) * Real(N + 2) / ((Real(1) + s) * (Real(1) + s));
}

// V = a(s) Q + b(s) with Q = Ric(y, y); the factor [N(N-2)]^{(N-2)/4} is folded in.
template <class Real>
struct CorrectionCoeffs {
    Real a, a1, a2, b, b1, b2;
};

template <class Real>
CorrectionCoeffs<Real> correction_coeffs(Real s, int N, double S) {
    const Real C = std::pow(Real(N) * Real(N - 2), Real(N - 2) / 4);
    const Real n = Real(N) / 2;
    const Real inv = Real(1) / (Real(1) + s);
    const Real w0 = std::pow(Real(1) + s, -n), w1 = w0 * inv, w2 = w1 * inv;
    const Real beta = -Real(S) / (24 * Real(N - 1));
    CorrectionCoeffs<Real> c;
    c.a = C * (s + 3) / 12 * w0;
    c.a1 = C * (w0 / 12 - n * (s + 3) / 12 * w1);
    c.a2 = C * (-2 * n / 12 * w1 + n * (n + 1) * (s + 3) / 12 * w2);
    c.b = C * beta * (s * s + 3) * w0;
    c.b1 = C * beta * (2 * s * w0 - n * (s * s + 3) * w1);
    c.b2 = C * beta * (2 * w0 - 4 * n * s * w1 + n * (n + 1) * (s * s + 3) * w2);
    return c;
}

// Unscaled correction V(y) with analytic derivatives.
template <class Real = double>
class CorrectionField {
public:
    CorrectionField(const LocalGeometry& geo, const DimensionParams& dims) : N_(dims.N), S_(geo.S) {
        if (geo.ric.rows() != N_ || geo.ric.cols() != N_)
            throw std::invalid_argument("Ricci matrix does not match the dimension");
        ric_.resize(std::size_t(N_) * N_);
        for (int i = 0; i < N_; ++i)
            for (int j = 0; j < N_; ++j) ric_[std::size_t(i) * N_ + j] = Real(geo.ric(i, j));
    }

    int N() const { return N_; }
    double S() const { return S_; }

    Real Q(const std::vector<Real>& y) const {
        Real q = 0;
        for (int i = 0; i < N_; ++i)
            for (int j = 0; j < N_; ++j) q += ric_[std::size_t(i) * N_ + j] * y[i] * y[j];
        return q;
    }

    std::vector<Real> Ry(const std::vector<Real>& y) const {
        std::vector<Real> r(N_, Real(0));
        for (int i = 0; i < N_; ++i)
            for (int j = 0; j < N_; ++j) r[i] += ric_[std::size_t(i) * N_ + j] * y[j];
        return r;
    }

    Real value(const std::vector<Real>& y) const {
        check(y);
        const auto c = correction_coeffs(norm_sq(y), N_, S_);
        return c.a * Q(y) + c.b;
    }

    std::vector<Real> gradient(const std::vector<Real>& y) const {
        check(y);
        const auto c = correction_coeffs(norm_sq(y), N_, S_);
        const Real q = Q(y);
        const auto ry = Ry(y);
        std::vector<Real> g(N_);
        for (int i = 0; i < N_; ++i) g[i] = 2 * c.a1 * q * y[i] + 2 * c.a * ry[i] + 2 * c.b1 * y[i];
        return g;
    }

    // Row-major N x N Hessian.
    std::vector<Real> hessian(const std::vector<Real>& y) const {
        check(y);
        const auto c = correction_coeffs(norm_sq(y), N_, S_);
        const Real q = Q(y);
        const auto ry = Ry(y);
        std::vector<Real> H(std::size_t(N_) * N_);
        for (int i = 0; i < N_; ++i)
            for (int j = 0; j < N_; ++j) {
                Real v = 4 * (c.a2 * q + c.b2) * y[i] * y[j] + 4 * c.a1 * (y[i] * ry[j] + ry[i] * y[j]) +
                         2 * c.a * ric_[std::size_t(i) * N_ + j];
                if (i == j) v += 2 * (c.a1 * q + c.b1);
                H[std::size_t(i) * N_ + j] = v;
            }
        return H;
    }

    Real laplacian(const std::vector<Real>& y) const {
        check(y);
        const Real s = norm_sq(y);
        const auto c = correction_coeffs(s, N_, S_);
        const Real q = Q(y);
        return q * (2 * Real(N_) * c.a1 + 4 * s * c.a2 + 8 * c.a1) + 2 * Real(S_) * c.a + 2 * Real(N_) * c.b1 +
               4 * s * c.b2;
    }

    // Right-hand side (1/3) Q/|y| dU/dr + alpha_N S U; dU/dr / |y| = 2 phi_U'(s) is regular at 0.
    Real rhs(const std::vector<Real>& y) const {
        const Real s = norm_sq(y);
        const auto u = bubble_jet(s, N_);
        const Real alpha = Real(N_ - 2) / (4 * Real(N_ - 1));
        return Q(y) * 2 * u.f1 / 3 + alpha * Real(S_) * u.f;
    }

private:
    int N_;
    double S_;
    std::vector<Real> ric_;

    static Real norm_sq(const std::vector<Real>& y) {
        Real s = 0;
        for (Real v : y) s += v * v;
        return s;
    }
    void check(const std::vector<Real>& y) const {
        if (int(y.size()) != N_) throw std::invalid_argument("point has wrong dimension");
    }
};

template <class Real = double>
Real eval_V(const std::vector<Real>& y, const LocalGeometry& geo, const DimensionParams& dims) {
    return CorrectionField<Real>(geo, dims).value(y);
}

// Delta V + p U^{p-1} V - [(1/3) Q/|y| dU/dr + alpha_N S U] with Delta by
// central differences in long double; each Richardson level halves the step.
inline double correction_residual(const std::vector<double>& y, const LocalGeometry& geo, const DimensionParams& dims,
                                  double step = 1e-3, int richardson_levels = 1) {
    using L = long double;
    if (!(step > 0.0) || step < 1e-9 * (1.0 + std::sqrt(std::inner_product(y.begin(), y.end(), y.begin(), 0.0))))
        throw std::invalid_argument("finite-difference step underflow (step = " + std::to_string(step) + ")");
    if (richardson_levels < 0) throw std::invalid_argument("richardson_levels must be >= 0");
    const CorrectionField<L> V(geo, dims);
    std::vector<L> yl(y.begin(), y.end());
    const L v0 = V.value(yl);
    auto fd_lap = [&](L h) {
        L sum = 0;
        auto z = yl;
        for (int i = 0; i < dims.N; ++i) {
            z[i] = yl[i] + h;
            const L vp = V.value(z);
            z[i] = yl[i] - h;
            const L vm = V.value(z);
            z[i] = yl[i];
            sum += (vp - 2 * v0 + vm) / (h * h);
        }
        return sum;
    };
    std::vector<L> table;
    for (int k = 0; k <= richardson_levels; ++k) table.push_back(fd_lap(L(step) / std::pow(L(2), k)));
    for (int lev = 1; lev <= richardson_levels; ++lev) {
        const L f = std::pow(L(4), lev);
        for (int k = richardson_levels; k >= lev; --k) table[k] = (f * table[k] - table[k - 1]) / (f - 1);
    }
    L s = 0;
    for (L v : yl) s += v * v;
    const L lhs = table[richardson_levels] + linearized_potential(s, dims.N) * v0;
    return double(lhs - V.rhs(yl));
}

struct KernelEval {
    double value;
    double laplacian;
};

// Phi^0 = (1-|y|^2)/(1+|y|^2)^{N/2}, Phi^i = y^i/(1+|y|^2)^{N/2}.
inline KernelEval kernel_phi(int i, const std::vector<double>& y, const DimensionParams& dims) {
    const int N = dims.N;
    if (i < 0 || i > N) throw std::out_of_range("kernel index must lie in 0..N, got " + std::to_string(i));
    if (int(y.size()) != N) throw std::invalid_argument("point has wrong dimension");
    double s = 0.0;
    for (double v : y) s += v * v;
    const double n = N / 2.0, w0 = std::pow(1.0 + s, -n), w1 = w0 / (1.0 + s), w2 = w1 / (1.0 + s);
    if (i == 0) {
        const double f = (1.0 - s) * w0;
        const double f1 = -w0 - n * (1.0 - s) * w1;
        const double f2 = 2.0 * n * w1 + n * (n + 1.0) * (1.0 - s) * w2;
        return {f, 2.0 * N * f1 + 4.0 * s * f2};
    }
    const double psi1 = -n * w1, psi2 = n * (n + 1.0) * w2;
    const double yi = y[i - 1];
    return {yi * w0, yi * (2.0 * (N + 2) * psi1 + 4.0 * s * psi2)};
}

struct CutoffEval {
    double value, d1, d2;
};

// 1 on [0, r0/2], 0 on [r0, inf), quintic smoothstep between (C^2).
inline CutoffEval cutoff(double r, double r0) {
    if (!(r0 > 0.0)) throw std::invalid_argument("cutoff radius r0 must be positive");
    if (r < 0.0) throw std::invalid_argument("radius must be >= 0");
    const double half = 0.5 * r0, t = (r - half) / half;
    if (t <= 0.0) return {1.0, 0.0, 0.0};
    if (t >= 1.0) return {0.0, 0.0, 0.0};
    const double t2 = t * t, u = 1.0 - t;
    return {1.0 - t2 * t * (6.0 * t2 - 15.0 * t + 10.0), -30.0 * t2 * u * u / half,
            -60.0 * t * u * (1.0 - 2.0 * t) / (half * half)};
}

inline double cutoff_chi(double r, double r0) { return cutoff(r, r0).value; }

struct BubbleProfile {
    DimensionParams dims;
    double mu = 1.0;

    double value(const std::vector<double>& x) const {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        return std::pow(mu, -(dims.N - 2) / 2.0) * eval_U(std::sqrt(r2) / mu, dims).value;
    }
};

struct CorrectionProfile {
    DimensionParams dims;
    LocalGeometry geo;
    double mu = 1.0;

    // V_mu(x) = mu^{-(N-2)/2} V(x/mu)
    double value(const std::vector<double>& x) const {
        std::vector<double> y(x);
        for (double& v : y) v /= mu;
        return std::pow(mu, -(dims.N - 2) / 2.0) * eval_V(y, geo, dims);
    }
};

struct AnsatzProfile {
    BubbleProfile bubble;
    CorrectionProfile correction;
    double r0 = 1.0;

    static AnsatzProfile make(const LocalGeometry& geo, double mu) {
        if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
        return {BubbleProfile{geo.dims, mu}, CorrectionProfile{geo.dims, geo, mu}, geo.dims.r0};
    }
};

// chi(|x|) (U_mu + mu^2 V_mu)(x)
inline double eval_W(const std::vector<double>& x, const AnsatzProfile& w) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    const double chi = cutoff_chi(std::sqrt(r2), w.r0);
    if (chi == 0.0) return 0.0;
    const double mu = w.bubble.mu;
    return chi * (w.bubble.value(x) + mu * mu * w.correction.value(x));
}

} // namespace yamabe::profiles
