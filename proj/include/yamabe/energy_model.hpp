#pragma once

// Quadrature oracle for J_eps at the ansatz W = chi (U_mu + mu^2 V_mu) on the
// normal-coordinate model of a LocalGeometry. In y = x/mu coordinates:
//
//   volume density      rho = 1 - (mu^2/6) Q + A_g mu^4 |y|^4   (Q = Ric(y,y))
//   weighted S_g        S - Lambda_g mu^2 |y|^2 / (2N)
//   weighted h          h
//   metric on gradients Euclidean (radial parts are exact by the Gauss lemma;
//                       the angular remainder is O(mu^6))
//
// The sphere averages of these reproduce the geodesic-sphere expansions of
// module curvature. The integrand is expanded as a finite series in mu^2, eps,
// Q and |Ric y|^2 with radial coefficients, the angular parts are integrated
// exactly by sphere moments, and each radial coefficient is integrated on its
// own so that the O(K) pieces never cancel inside one quadrature.

#include "yamabe/curvature.hpp"
#include "yamabe/energy.hpp"
#include "yamabe/integrals.hpp"
#include "yamabe/polynomial.hpp"
#include "yamabe/profiles.hpp"
#include "yamabe/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace yamabe::energy {

namespace model {

inline constexpr int max_k2 = 5; // mu^{2 k2}
inline constexpr int max_q = 4;  // Q^q
inline constexpr int n_slots = (max_k2 + 1) * 2 * (max_q + 1) * 2;

struct Key {
    int k2, e, q, ry; // mu^{2 k2} eps^e Q^q |Ric y|^{2 ry}
};

inline int slot(int k2, int e, int q, int ry) { return ((k2 * 2 + e) * (max_q + 1) + q) * 2 + ry; }
inline Key key_of(int s) {
    Key k;
    k.ry = s % 2;
    s /= 2;
    k.q = s % (max_q + 1);
    s /= (max_q + 1);
    k.e = s % 2;
    k.k2 = s / 2;
    return k;
}

struct Term {
    int s;
    double v;
};

class Series {
public:
    Series() = default;
    static Series mono(double v, int k2 = 0, int e = 0, int q = 0, int ry = 0) {
        Series r;
        if (v != 0.0) r.t_.push_back({slot(k2, e, q, ry), v});
        return r;
    }
    const std::vector<Term>& terms() const { return t_; }

    friend Series operator+(const Series& a, const Series& b) {
        std::array<double, n_slots> acc{};
        for (const auto& t : a.t_) acc[t.s] += t.v;
        for (const auto& t : b.t_) acc[t.s] += t.v;
        return compact(acc);
    }
    friend Series operator*(double c, const Series& a) {
        Series r(a);
        for (auto& t : r.t_) t.v *= c;
        return r;
    }
    friend Series operator*(const Series& a, const Series& b) {
        std::array<double, n_slots> acc{};
        for (const auto& x : a.t_) {
            const Key kx = key_of(x.s);
            for (const auto& y : b.t_) {
                const Key ky = key_of(y.s);
                const int k2 = kx.k2 + ky.k2, e = kx.e + ky.e, q = kx.q + ky.q, ry = kx.ry + ky.ry;
                if (k2 > max_k2 || e > 1 || q > max_q || ry > 1)
                    throw std::logic_error("energy model series exceeded its truncation bounds");
                acc[slot(k2, e, q, ry)] += x.v * y.v;
            }
        }
        return compact(acc);
    }

    void scatter(std::array<double, n_slots>& out) const {
        out.fill(0.0);
        for (const auto& t : t_) out[t.s] = t.v;
    }

private:
    std::vector<Term> t_;
    static Series compact(const std::array<double, n_slots>& acc) {
        Series r;
        for (int s = 0; s < n_slots; ++s)
            if (acc[s] != 0.0) r.t_.push_back({s, acc[s]});
        return r;
    }
};

} // namespace model

// J(mu, eps) = K/N + excess0 + eps * eps_slope
struct JSample {
    double mu = 0.0;
    double K_over_N = 0.0;
    double excess0 = 0.0;
    double eps_slope = 0.0;
    double max_ratio = 0.0; // sup |mu^2 V / U| over the chart (positivity margin)

    double excess(double eps) const { return excess0 + eps * eps_slope; }
    double total(double eps) const { return K_over_N + excess(eps); }
};

class JModel {
public:
    explicit JModel(const LocalGeometry& geo, quad::Options opt = default_options()) : geo_(geo), opt_(opt) {
        detail::require_branch(geo);
        const int N = geo.dims.N;
        K_ = integrals::K_pow(N);
        A_ = curvature::a_g(geo);
        Lambda_ = curvature::lambda_g(geo);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (geo.ric + geo.ric.transpose()));
        lambdas_ = es.eigenvalues();
        // Angular moments of Q^q |Ric y|^{2 ry} from the Ricci eigenbasis.
        Polynomial Qd(N), Rd(N);
        for (int i = 0; i < N; ++i) {
            std::vector<int> a(N, 0);
            a[i] = 2;
            Qd += Polynomial::monomial(a, lambdas_[i]);
            Rd += Polynomial::monomial(a, lambdas_[i] * lambdas_[i]);
        }
        for (int q = 0; q <= model::max_q; ++q) {
            const Polynomial Pq = Qd.pow(q);
            moments_[q][0] = integrals::angular_integral(Pq, N);
            moments_[q][1] = q + 1 <= model::max_q ? integrals::angular_integral(Pq * Rd, N) : 0.0;
        }
        // Active slots: union of the structures at a flat point and an annulus point.
        std::array<double, model::n_slots> buf;
        active_.clear();
        std::array<bool, model::n_slots> seen{};
        for (const auto& [r, mu, cut] : {std::tuple{1.3, 0.0, false}, std::tuple{0.75 / 0.01, 0.01, true}}) {
            integrand(r, mu, cut).scatter(buf);
            for (int s = 0; s < model::n_slots; ++s)
                if (buf[s] != 0.0 && !seen[s]) seen[s] = true;
        }
        for (int s = 0; s < model::n_slots; ++s)
            if (seen[s]) active_.push_back(s);
        base_ = model::slot(0, 0, 0, 0);
        head_ = integrate_region(0.0, head_radius_, 0.0, false, false, opt_);
    }

    static quad::Options default_options() {
        quad::Options o;
        o.abs_tol = 0.0;
        o.rel_tol = 1e-12;
        o.max_intervals = 4000;
        o.abs_scale_floor = 1e-13;
        return o;
    }

    const LocalGeometry& geometry() const { return geo_; }

    JSample sample(double mu) const {
        const double r0 = geo_.dims.r0;
        if (!(mu > 0.0) || mu > 1e-2 * r0 * (1 + 1e-12))
            throw std::invalid_argument("j_quadrature needs 0 < mu <= 1e-2 r0");
        const int N = geo_.dims.N;
        const double L1 = r0 / (2.0 * mu);
        // Slots are needed only to a fixed fraction of the mu^4 and eps mu^2 signal
        // they feed; high slots cancel internally at large radius and cannot meet a
        // relative tolerance.
        quad::Options o = opt_;
        o.component_abs_tol.assign(active_.size(), 0.0);
        const double curv2 = geo_.W_norm_sq + geo_.E_norm_sq + geo_.S * geo_.S;
        for (std::size_t i = 0; i < active_.size(); ++i) {
            const auto k = model::key_of(active_[i]);
            if (active_[i] == base_) continue;
            const double target = signal_fraction * K_ * std::pow(mu, 2) * (k.e == 0 ? mu * mu * curv2 : std::abs(geo_.h));
            const double weight = std::abs(moments_[k.q][k.ry]) * std::pow(mu, 2 * k.k2);
            o.component_abs_tol[i] = weight > 0.0 ? target / weight : std::numeric_limits<double>::max();
        }
        const auto tail = integrate_region(head_radius_, L1, mu, false, true, o);
        const auto ann = integrate_region(L1, 2.0 * L1, mu, true, false, o);
        // Flat leading integrand beyond L1, needed for the exact K/N subtraction.
        auto f0 = [&](double r, double* o) {
            std::array<double, model::n_slots> b;
            integrand(r, mu, false).scatter(b);
            o[0] = b[base_] * std::pow(r, N - 1);
        };
        const double beyond = quad::integrate_many_log_from(f0, 1, L1, opt_)[0].value;

        JSample out;
        out.mu = mu;
        out.K_over_N = K_ / N;
        out.max_ratio = positivity_ratio(mu);
        if (out.max_ratio >= 0.5)
            throw std::domain_error("ansatz positivity margin exhausted: sup |mu^2 V/U| = " +
                                    std::to_string(out.max_ratio) + " at mu = " + std::to_string(mu));
        for (std::size_t i = 0; i < active_.size(); ++i) {
            const int s = active_[i];
            const auto k = model::key_of(s);
            const double m = moments_[k.q][k.ry];
            if (s == base_) {
                out.excess0 += m * (ann[i] - beyond);
                continue;
            }
            const double c = m * (head_[i] + tail[i] + ann[i]) * std::pow(mu, 2 * k.k2);
            (k.e == 0 ? out.excess0 : out.eps_slope) += c;
        }
        return out;
    }

private:
    LocalGeometry geo_;
    quad::Options opt_;
    double K_ = 0.0, A_ = 0.0, Lambda_ = 0.0;
    Eigen::VectorXd lambdas_;
    std::array<std::array<double, 2>, model::max_q + 1> moments_{};
    std::vector<int> active_;
    int base_ = 0;
    double head_radius_ = 10.0;
    static constexpr double signal_fraction = 1e-10;
    std::vector<double> head_;

    // Series integrand at radius r (y units). cut = false: chi = 1, chi' = 0.
    model::Series integrand(double r, double mu, bool cut) const {
        using model::Series;
        const int N = geo_.dims.N;
        const double s = r * r;
        const auto uj = profiles::bubble_jet(s, N);
        const double u = uj.f, u1 = 2.0 * uj.f1; // u1 = U'(r)/r
        const auto c = profiles::correction_coeffs(s, N, geo_.S);
        double chi = 1.0, dchi = 0.0;
        if (cut) {
            const auto ce = profiles::cutoff(mu * r, geo_.dims.r0);
            chi = ce.value;
            dchi = ce.d1;
        }
        const double rad = cut ? mu * dchi / r : 0.0;
        const double G = chi * u1 + rad * u;
        const double a1 = 2.0 * chi * c.a1 + rad * c.a;
        const double a0 = 2.0 * chi * c.b1 + rad * c.b;
        const double beta = 2.0 * chi * c.a;
        const double ts = geo_.dims.two_star;

        // grad w = y (G + mu^2 (a1 Q + a0)) + mu^2 beta Ric y
        const Series X = Series::mono(G) + Series::mono(a1, 1, 0, 1) + Series::mono(a0, 1);
        const Series grad = s * (X * X) + (2.0 * beta) * (Series::mono(1.0, 1, 0, 1) * X) +
                            Series::mono(beta * beta, 2, 0, 0, 1);
        const Series rho = Series::mono(1.0) + Series::mono(-1.0 / 6.0, 1, 0, 1) + Series::mono(A_ * s * s, 2);
        const Series V = Series::mono(c.a, 0, 0, 1) + Series::mono(c.b);
        const Series w = Series::mono(chi * u) + chi * (Series::mono(1.0, 1) * V);
        const double alpha = geo_.dims.alpha_N;
        const Series pot = Series::mono(0.5 * alpha * geo_.S, 1) +
                           Series::mono(-0.5 * alpha * Lambda_ * s / (2.0 * N), 2) + Series::mono(0.5 * geo_.h, 1, 1);
        // (1 + tau)^{2*} to third order; exact for N = 6
        const Series tau = (1.0 / u) * (Series::mono(1.0, 1) * V);
        const double c1 = ts, c2 = ts * (ts - 1) / 2, c3 = ts * (ts - 1) * (ts - 2) / 6;
        const Series tau2 = tau * tau;
        const Series powser = Series::mono(1.0) + c1 * tau + c2 * tau2 + c3 * (tau2 * tau);
        const double P0 = std::pow(chi * u, ts);
        return 0.5 * (grad * rho) + pot * (w * w) + (-P0 / ts) * (rho * powser);
    }

    // Integrals of r^{N-1+deg} f_slot over [a, b] for each active slot.
    std::vector<double> integrate_region(double a, double b, double mu, bool cut, bool log_map,
                                         const quad::Options& opt) const {
        const int N = geo_.dims.N;
        std::vector<int> deg(active_.size());
        for (std::size_t i = 0; i < active_.size(); ++i) {
            const auto k = model::key_of(active_[i]);
            deg[i] = 2 * k.q + 2 * k.ry;
        }
        auto f = [&](double r, double* o) {
            std::array<double, model::n_slots> buf;
            integrand(r, mu, cut).scatter(buf);
            for (std::size_t i = 0; i < active_.size(); ++i) o[i] = buf[active_[i]] * std::pow(r, N - 1 + deg[i]);
        };
        std::vector<quad::Result> res;
        if (b <= a) return std::vector<double>(active_.size(), 0.0);
        if (log_map)
            res = quad::integrate_many_log(f, active_.size(), a, b, opt);
        else if (a == 0.0)
            res = quad::integrate_many_radial(f, active_.size(), b, opt);
        else
            res = quad::integrate_many(f, active_.size(), a, b, opt);
        std::vector<double> out(res.size());
        for (std::size_t i = 0; i < res.size(); ++i) out[i] = res[i].value;
        return out;
    }

    // sup over the chart of |mu^2 V / U| using the extreme Ricci eigenvalues.
    double positivity_ratio(double mu) const {
        const int N = geo_.dims.N;
        const double lmin = lambdas_.minCoeff(), lmax = lambdas_.maxCoeff();
        const double rmax = geo_.dims.r0 / mu;
        double worst = 0.0;
        for (int i = 0; i <= 400; ++i) {
            const double r = rmax * std::pow(1e-4, 1.0 - i / 400.0) * (i == 0 ? 0.0 : 1.0);
            const double s = r * r;
            const auto c = profiles::correction_coeffs(s, N, geo_.S);
            const double u = profiles::bubble_jet(s, N).f;
            for (double l : {lmin, lmax}) worst = std::max(worst, std::abs(mu * mu * (c.a * l * s + c.b) / u));
        }
        return worst;
    }
};

struct JValue {
    double total = 0.0;
    double excess = 0.0; // total - K_N^{-N}/N
};

inline JValue j_quadrature(const LocalGeometry& geo, double mu, double eps) {
    const auto s = JModel(geo).sample(mu);
    return {s.total(eps), s.excess(eps)};
}

} // namespace yamabe::energy
