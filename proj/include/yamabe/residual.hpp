#pragma once

// Strong-form residual Delta_g W + (alpha_N S_g + eps h) W - W_+^p of the ansatz
// in the L^{2N/(N+2)} norm, on the chart with the quadratic normal metric
// g_ij = d_ij - (1/3) R_ikjl x^k x^l and S_g(x) = S + <grad S, x> - lap_S |x|^2/(2N).
//
// In y = x/mu the scaling factors cancel exactly for q = 2N/(N+2):
//   ||res||_q = ( int |Phi(y)|^q sqrt|g|(mu y) dy )^{1/q},
//   Phi = -tr(G Hess w) - mu v.grad w + mu^2 (alpha_N S_g + eps h) w - w_+^p,
// with w = chi(mu|y|) (U + mu^2 V), G = g^{-1} and v the first-order part of
// the Laplace-Beltrami operator at x = mu y.

#include "yamabe/curvature.hpp"
#include "yamabe/dimension.hpp"
#include "yamabe/integrals.hpp"
#include "yamabe/profiles.hpp"
#include "yamabe/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace yamabe::residual {

using curvature::AlgebraicCurvature;
using curvature::LocalGeometry;
using curvature::Matrix;
using curvature::Vector;

struct ChartModel {
    DimensionParams dims;
    AlgebraicCurvature R;
    Vector grad_S;
    LocalGeometry geo;

    static ChartModel make(const AlgebraicCurvature& R, const DimensionParams& dims, Vector grad_S = {},
                           double lap_S = 0.0, double h = 0.0) {
        curvature::require_symmetries(R);
        if (grad_S.size() == 0) grad_S = Vector::Zero(dims.N);
        if (grad_S.size() != dims.N) throw std::invalid_argument("grad S has the wrong dimension");
        return {dims, R, grad_S, curvature::decompose(R, dims, lap_S, h)};
    }
};

struct ResidualSample {
    double mu = 0.0;
    double eps = 0.0;
    double value = 0.0;    // full residual norm
    double eps_part = 0.0; // || eps h W ||, the eps-dependent term on its own
};

struct ResidualOptions {
    int directions = 64; // antithetic pairs, so rounded up to even
    std::uint64_t seed = 20240601;
    int gauss_order = 8;
    double inner_radius = 1e-2;   // y-units; [0, inner_radius] is one panel
    double log_panel_width = 0.5; // in ln r
    int annulus_panels = 16;
};

inline double predicted_exponent(int N) {
    if (N < 6) throw std::invalid_argument("rates are stated for N >= 6");
    if (N <= 7) return (N - 2) / 2.0;
    if (N <= 9) return 3.0;
    return 2.0 * (N + 2) / (N - 2);
}

inline constexpr double predicted_eps_exponent = 2.0;

class ResidualModel {
public:
    explicit ResidualModel(const ChartModel& chart, ResidualOptions opt = {})
        : chart_(chart), opt_(opt), field_(chart.geo, chart.dims) {
        const int N = chart.dims.N;
        if (opt_.directions < 2) throw std::invalid_argument("need at least two directions");
        if (opt_.gauss_order < 1 || opt_.annulus_panels < 1 || !(opt_.inner_radius > 0.0) || !(opt_.log_panel_width > 0.0))
            throw std::invalid_argument("invalid residual quadrature options");
        rule_ = quad::gauss_legendre(opt_.gauss_order);
        std::mt19937_64 rng(opt_.seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const int pairs = (opt_.directions + 1) / 2;
        for (int d = 0; d < pairs; ++d) {
            Vector th(N);
            for (int i = 0; i < N; ++i) th[i] = gauss(rng);
            th.normalize();
            dirs_.push_back(direction(th));
            dirs_.push_back(direction(-th));
        }
        const double r0 = chart.dims.r0;
        for (const auto& d : dirs_)
            if (!(1.0 - r0 * r0 * d.lambda.maxCoeff() / 3.0 > 0.0))
                throw std::domain_error("quadratic normal metric degenerates inside the chart radius r0 = " +
                                        std::to_string(r0));
    }

    const ChartModel& chart() const { return chart_; }

    ResidualSample sample(double mu, double eps) const {
        const double r0 = chart_.dims.r0;
        if (!(mu > 0.0) || !(mu <= 1e-2 * r0 * (1 + 1e-12)))
            throw std::invalid_argument("residual needs 0 < mu <= 1e-2 r0");
        const int N = chart_.dims.N;
        const double q = 2.0 * N / (N + 2);
        const double L1 = r0 / (2.0 * mu);
        // radial nodes and weights (including r^{N-1})
        std::vector<double> nodes, weights;
        auto panel = [&](double a, double b) {
            for (std::size_t k = 0; k < rule_.nodes.size(); ++k) {
                const double r = 0.5 * (a + b) + 0.5 * (b - a) * rule_.nodes[k];
                nodes.push_back(r);
                weights.push_back(0.5 * (b - a) * rule_.weights[k] * std::pow(r, N - 1));
            }
        };
        panel(0.0, opt_.inner_radius);
        const double t0 = std::log(opt_.inner_radius), t1 = std::log(L1);
        const int nlog = std::max(1, int(std::ceil((t1 - t0) / opt_.log_panel_width)));
        for (int i = 0; i < nlog; ++i) {
            const double ta = t0 + (t1 - t0) * i / nlog, tb = t0 + (t1 - t0) * (i + 1) / nlog;
            for (std::size_t k = 0; k < rule_.nodes.size(); ++k) {
                const double t = 0.5 * (ta + tb) + 0.5 * (tb - ta) * rule_.nodes[k];
                const double r = std::exp(t);
                nodes.push_back(r);
                weights.push_back(0.5 * (tb - ta) * rule_.weights[k] * std::pow(r, N));
            }
        }
        for (int i = 0; i < opt_.annulus_panels; ++i)
            panel(L1 + L1 * i / opt_.annulus_panels, L1 + L1 * (i + 1) / opt_.annulus_panels);

        double total = 0.0, eps_total = 0.0;
        for (const auto& d : dirs_)
            for (std::size_t k = 0; k < nodes.size(); ++k) {
                const auto e = evaluate(d, nodes[k], mu, eps);
                const double wv = weights[k] * e.volume;
                total += wv * std::pow(std::abs(e.phi), q);
                eps_total += wv * std::pow(std::abs(e.eps_term), q);
            }
        // sphere average times omega_{N-1}
        const double scale = integrals::omega(N - 1) / double(dirs_.size());
        ResidualSample s;
        s.mu = mu;
        s.eps = eps;
        s.value = std::pow(scale * total, 1.0 / q);
        s.eps_part = std::pow(scale * eps_total, 1.0 / q);
        return s;
    }

    // Phi at y = r theta for the d-th quadrature direction; exposed for tests.
    double phi(int d, double r, double mu, double eps) const { return evaluate(dirs_.at(d), r, mu, eps).phi; }
    const Vector& direction_vector(int d) const { return dirs_.at(d).theta; }
    int direction_count() const { return int(dirs_.size()); }

private:
    struct Direction {
        Vector theta;
        Matrix E;          // eigenvectors of M(theta)_ij = R_{i theta j theta}
        Vector lambda;     // eigenvalues
        Matrix T;          // T_ab = sum_i E_ia (E^T D_i E)_ab
        Matrix diagD;      // diagD(i, a) = (E^T D_i E)_aa
        Vector ric_theta;  // Ric theta
        double Q = 0.0;    // Ric(theta, theta)
        double dS = 0.0;   // <grad S, theta>
    };
    struct Eval {
        double phi, eps_term, volume;
    };

    ChartModel chart_;
    ResidualOptions opt_;
    profiles::CorrectionField<double> field_;
    quad::GaussRule rule_;
    std::vector<Direction> dirs_;

    Direction direction(const Vector& th) const {
        const int N = chart_.dims.N;
        const auto& R = chart_.R;
        Direction d;
        d.theta = th;
        Matrix M = Matrix::Zero(N, N);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                double s = 0.0;
                for (int k = 0; k < N; ++k)
                    for (int l = 0; l < N; ++l) s += R(i, k, j, l) * th[k] * th[l];
                M(i, j) = s;
            }
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()));
        d.E = es.eigenvectors();
        d.lambda = es.eigenvalues();
        d.T = Matrix::Zero(N, N);
        d.diagD = Matrix::Zero(N, N);
        for (int m = 0; m < N; ++m) {
            Matrix D(N, N);
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) {
                    double s = 0.0;
                    for (int l = 0; l < N; ++l) s += (R(i, m, j, l) + R(i, l, j, m)) * th[l];
                    D(i, j) = s;
                }
            const Matrix Dt = d.E.transpose() * D * d.E;
            d.T += d.E.row(m).transpose().asDiagonal() * Dt;
            d.diagD.row(m) = Dt.diagonal().transpose();
        }
        d.ric_theta = chart_.geo.ric * th;
        d.Q = th.dot(d.ric_theta);
        d.dS = chart_.grad_S.dot(th);
        return d;
    }

    Eval evaluate(const Direction& d, double r, double mu, double eps) const {
        const int N = chart_.dims.N;
        const auto& dims = chart_.dims;
        const double rho = mu * r; // |x|
        const Vector lp = (1.0 - rho * rho / 3.0 * d.lambda.array()).inverse().matrix();
        double volume = 1.0;
        for (int a = 0; a < N; ++a) volume /= lp[a];
        volume = std::sqrt(volume);

        // first-order coefficient (x-units): v_j + (G grad ln sqrt g)_j
        const Vector u = lp.cwiseProduct(d.T.transpose() * lp);
        const Vector v = (rho / 3.0) * (d.E * u);
        const Vector gl = (-rho / 6.0) * (d.diagD * lp);
        const Vector vt = v + d.E * lp.cwiseProduct(d.E.transpose() * gl);

        // f = U + mu^2 V and its derivatives at y = r theta
        const double s = r * r;
        const auto uj = profiles::bubble_jet(s, N);
        const auto c = profiles::correction_coeffs(s, N, chart_.geo.S);
        const double m2 = mu * mu;
        const double Qy = s * d.Q;
        const Vector y = r * d.theta;
        const Vector Ry = r * d.ric_theta;
        const double f = uj.f + m2 * (c.a * Qy + c.b);
        const Vector gf = (2.0 * uj.f1 + m2 * (2.0 * c.a1 * Qy + 2.0 * c.b1)) * y + (2.0 * m2 * c.a) * Ry;
        // tr(G H) over the pieces of Hess f
        auto trG_outer = [&](const Vector& a, const Vector& b) {
            const Vector ea = d.E.transpose() * a, eb = d.E.transpose() * b;
            return (lp.array() * ea.array() * eb.array()).sum();
        };
        const double trG = lp.sum();
        const Vector Et = d.E.transpose() * d.theta;
        const double trG_tt = (lp.array() * Et.array().square()).sum();
        const double trG_ric = (d.E.transpose() * chart_.geo.ric * d.E).diagonal().dot(lp);
        double trGHf = s * (4.0 * uj.f2 + m2 * 4.0 * (c.a2 * Qy + c.b2)) * trG_tt + 2.0 * uj.f1 * trG +
                       m2 * (8.0 * c.a1 * r * trG_outer(d.theta, Ry) + 2.0 * c.a * trG_ric +
                             2.0 * (c.a1 * Qy + c.b1) * trG);

        // cutoff chi(mu r)
        const auto ch = profiles::cutoff(rho, dims.r0);
        double w = ch.value * f;
        double trGHw = ch.value * trGHf;
        Vector gw = ch.value * gf;
        if (ch.d1 != 0.0 || ch.d2 != 0.0) {
            const double c1 = mu * ch.d1, c2 = mu * mu * ch.d2; // d/dr and d2/dr2 in y-units
            gw += (c1 * f) * d.theta;
            trGHw += 2.0 * c1 * trG_outer(d.theta, gf) + f * (c2 * trG_tt + (c1 / r) * (trG - trG_tt));
        }

        const double x2 = rho * rho;
        const double Sg = chart_.geo.S + d.dS * rho - chart_.geo.lap_S * x2 / (2.0 * N);
        const double p = dims.p;
        const double nonlinear = w > 0.0 ? std::pow(w, p) : 0.0;
        Eval e;
        e.eps_term = m2 * eps * chart_.geo.h * w;
        e.phi = -trGHw - mu * vt.dot(gw) + m2 * dims.alpha_N * Sg * w + e.eps_term - nonlinear;
        e.volume = volume;
        return e;
    }
};

inline ResidualSample residual_norm(const ChartModel& chart, double mu, double eps, const ResidualOptions& opt = {}) {
    return ResidualModel(chart, opt).sample(mu, eps);
}

} // namespace yamabe::residual
