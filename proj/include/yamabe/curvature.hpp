#pragma once

// Pointwise curvature algebra in an orthonormal frame at the base point.
// Sign convention: the unit sphere has R_ijkl = d_ik d_jl - d_il d_jk, so
// R_ij = sum_k R_ikjk and the scalar curvature of S^N is N(N-1).
// Manifold-side Laplacians (lap_S) use the geometer's sign, -div grad.

#include "yamabe/dimension.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace yamabe::curvature {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class AlgebraicCurvature {
public:
    AlgebraicCurvature() = default;
    explicit AlgebraicCurvature(int N) : N_(N), data_(std::size_t(N) * N * N * N, 0.0) {
        if (N < 2) throw std::invalid_argument("curvature tensor needs dimension >= 2");
    }
    AlgebraicCurvature(int N, std::vector<double> components) : N_(N), data_(std::move(components)) {
        if (N < 2) throw std::invalid_argument("curvature tensor needs dimension >= 2");
        if (data_.size() != std::size_t(N) * N * N * N)
            throw std::invalid_argument("expected " + std::to_string(N * N * N * N) + " components, got " +
                                        std::to_string(data_.size()));
    }

    int N() const { return N_; }
    double operator()(int i, int j, int k, int l) const { return data_[index(i, j, k, l)]; }
    double& operator()(int i, int j, int k, int l) { return data_[index(i, j, k, l)]; }
    const std::vector<double>& components() const { return data_; }

    double norm_sq() const {
        double s = 0.0;
        for (double v : data_) s += v * v;
        return s;
    }

    AlgebraicCurvature& operator+=(const AlgebraicCurvature& o) {
        if (o.N_ != N_) throw std::invalid_argument("dimension mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    AlgebraicCurvature& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

private:
    int N_ = 0;
    std::vector<double> data_;
    std::size_t index(int i, int j, int k, int l) const {
        return ((std::size_t(i) * N_ + j) * N_ + k) * N_ + l;
    }
};

struct SymmetryReport {
    double antisymmetry = 0.0;   // max |R_ijkl + R_jikl|, |R_ijkl + R_ijlk|
    double pair_symmetry = 0.0;  // max |R_ijkl - R_klij|
    double bianchi = 0.0;        // max |R_ijkl + R_iklj + R_iljk|
    double worst() const { return std::max({antisymmetry, pair_symmetry, bianchi}); }
    bool ok(double tol) const { return worst() <= tol; }
};

inline SymmetryReport check_symmetries(const AlgebraicCurvature& R) {
    SymmetryReport r;
    const int N = R.N();
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k)
                for (int l = 0; l < N; ++l) {
                    const double v = R(i, j, k, l);
                    r.antisymmetry = std::max({r.antisymmetry, std::abs(v + R(j, i, k, l)), std::abs(v + R(i, j, l, k))});
                    r.pair_symmetry = std::max(r.pair_symmetry, std::abs(v - R(k, l, i, j)));
                    r.bianchi = std::max(r.bianchi, std::abs(v + R(i, k, l, j) + R(i, l, j, k)));
                }
    return r;
}

inline void require_symmetries(const AlgebraicCurvature& R, double tol = 1e-12) {
    const auto rep = check_symmetries(R);
    const double scale = std::max(1.0, std::sqrt(R.norm_sq()));
    if (!rep.ok(tol * scale))
        throw std::invalid_argument("curvature tensor violates its symmetries (worst defect " +
                                    std::to_string(rep.worst()) + ")");
}

// (h . k)_abcd = h_ac k_bd + h_bd k_ac - h_ad k_bc - h_bc k_ad
inline AlgebraicCurvature kulkarni_nomizu(const Matrix& h, const Matrix& k) {
    const int N = int(h.rows());
    if (h.cols() != N || k.rows() != N || k.cols() != N) throw std::invalid_argument("dimension mismatch");
    AlgebraicCurvature R(N);
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b)
            for (int c = 0; c < N; ++c)
                for (int d = 0; d < N; ++d)
                    R(a, b, c, d) = h(a, c) * k(b, d) + h(b, d) * k(a, c) - h(a, d) * k(b, c) - h(b, c) * k(a, d);
    return R;
}

inline Matrix ricci_from_riemann(const AlgebraicCurvature& R) {
    const int N = R.N();
    Matrix ric = Matrix::Zero(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            double s = 0.0;
            for (int k = 0; k < N; ++k) s += R(i, k, j, k);
            ric(i, j) = s;
        }
    return 0.5 * (ric + ric.transpose());
}

// Weyl part built component by component: Rm - (E . g)/(N-2) - S/(2N(N-1)) (g . g)/2.
inline AlgebraicCurvature weyl_tensor(const AlgebraicCurvature& R) {
    const int N = R.N();
    const Matrix ric = ricci_from_riemann(R);
    const double S = ric.trace();
    const Matrix I = Matrix::Identity(N, N);
    AlgebraicCurvature W = kulkarni_nomizu(ric - (S / N) * I, I);
    W *= -1.0 / (N - 2);
    AlgebraicCurvature G = kulkarni_nomizu(I, I);
    G *= -S / (2.0 * N * (N - 1));
    W += G;
    W += R;
    return W;
}

struct LocalGeometry {
    DimensionParams dims;
    double S = 0.0;
    Matrix ric;
    double E_norm_sq = 0.0;
    double W_norm_sq = 0.0;
    double ric_norm_sq = 0.0;
    double rm_norm_sq = 0.0;
    double lap_S = 0.0;
    double h = 0.0;

    // Geometry with prescribed scalars; Ric = (S/N) I + diag(e, -e, 0, ...) with 2e^2 = E2.
    static LocalGeometry from_scalars(const DimensionParams& dims, double S, double E2, double W2, double lap_S = 0.0,
                                      double h = 0.0) {
        if (E2 < 0.0 || W2 < 0.0) throw std::invalid_argument("squared norms must be nonnegative");
        const int N = dims.N;
        LocalGeometry g;
        g.dims = dims;
        g.S = S;
        g.ric = (S / N) * Matrix::Identity(N, N);
        const double e = std::sqrt(0.5 * E2);
        g.ric(0, 0) += e;
        g.ric(1, 1) -= e;
        g.E_norm_sq = E2;
        g.W_norm_sq = W2;
        g.ric_norm_sq = E2 + S * S / N;
        g.rm_norm_sq = W2 + 4.0 / (N - 2) * E2 + 2.0 / (double(N) * (N - 1)) * S * S;
        g.lap_S = lap_S;
        g.h = h;
        return g;
    }
};

// Orthogonal decomposition: |W|^2 by subtraction of the trace parts from |Rm|^2.
inline LocalGeometry decompose(const AlgebraicCurvature& R, const DimensionParams& dims, double lap_S = 0.0,
                               double h = 0.0) {
    if (R.N() != dims.N) throw std::invalid_argument("dimension mismatch between tensor and parameters");
    const int N = dims.N;
    LocalGeometry g;
    g.dims = dims;
    g.ric = ricci_from_riemann(R);
    g.S = g.ric.trace();
    g.ric_norm_sq = g.ric.squaredNorm();
    g.E_norm_sq = g.ric_norm_sq - g.S * g.S / N;
    g.rm_norm_sq = R.norm_sq();
    g.W_norm_sq = g.rm_norm_sq - 4.0 / (N - 2) * g.E_norm_sq - 2.0 / (double(N) * (N - 1)) * g.S * g.S;
    g.lap_S = lap_S;
    g.h = h;
    return g;
}

// Lambda_g = Delta_g S + S^2/3
inline double lambda_g(const LocalGeometry& g) { return g.lap_S + g.S * g.S / 3.0; }

// A_g = (18 Delta S + 8|Ric|^2 - 3|Rm|^2 + 5 S^2) / (360 N (N+2))
inline double a_g(const LocalGeometry& g) {
    const double N = g.dims.N;
    return (18.0 * g.lap_S + 8.0 * g.ric_norm_sq - 3.0 * g.rm_norm_sq + 5.0 * g.S * g.S) / (360.0 * N * (N + 2.0));
}

// Coefficients of the geodesic-sphere averages in powers of r.
struct SphereAverages {
    double h0 = 0.0;
    bool h_has_linear_remainder = true; // the O(r) term is not modeled
    double S0 = 0.0, S2 = 0.0;          // S0 + S2 r^2
    double area0 = 1.0, area2 = 0.0, area4 = 0.0;
};

inline SphereAverages sphere_average_coeffs(const LocalGeometry& g) {
    SphereAverages a;
    const double N = g.dims.N;
    a.h0 = g.h;
    a.S0 = g.S;
    a.S2 = -lambda_g(g) / (2.0 * N);
    a.area2 = -g.S / (6.0 * N);
    a.area4 = a_g(g);
    return a;
}

struct NormalMetric {
    Matrix g;
    double det = 1.0;
};

// g_ij(x) = d_ij - (1/3) R_ikjl x^k x^l
inline NormalMetric normal_metric(const AlgebraicCurvature& R, const Vector& x, double r0) {
    const int N = R.N();
    if (x.size() != N) throw std::invalid_argument("coordinate vector has wrong dimension");
    if (!(x.norm() < r0)) throw std::domain_error("normal-coordinate model requires |x| < r0");
    NormalMetric m;
    m.g = Matrix::Identity(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            double s = 0.0;
            for (int k = 0; k < N; ++k)
                for (int l = 0; l < N; ++l) s += R(i, k, j, l) * x[k] * x[l];
            m.g(i, j) -= s / 3.0;
        }
    m.det = m.g.determinant();
    return m;
}

inline AlgebraicCurvature flat(int N) { return AlgebraicCurvature(N); }

inline AlgebraicCurvature sphere(int N, double radius = 1.0) {
    if (!(radius > 0.0)) throw std::invalid_argument("sphere radius must be positive");
    const Matrix g = Matrix::Identity(N, N);
    AlgebraicCurvature R = kulkarni_nomizu(g, g);
    R *= 0.5 / (radius * radius);
    return R;
}

// S^{n1}(r1) x S^{n2}(r2) with the first factor on coordinates 0..n1-1.
inline AlgebraicCurvature product_spheres(int n1, double r1, int n2, double r2) {
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("factor dimensions must be positive");
    if (!(r1 > 0.0) || !(r2 > 0.0)) throw std::invalid_argument("factor radii must be positive");
    const int N = n1 + n2;
    AlgebraicCurvature R(N);
    auto fill = [&](int off, int n, double radius) {
        const double c = 1.0 / (radius * radius);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l)
                        R(off + i, off + j, off + k, off + l) = c * ((i == k && j == l) - (i == l && j == k));
    };
    fill(0, n1, r1);
    fill(n1, n2, r2);
    return R;
}

struct ModelParams {
    int N = 6;
    double radius = 1.0;
    int n1 = 0, n2 = 0;
    double r1 = 1.0, r2 = 1.0;
    std::vector<double> components;
    bool require_expansion_dimension = false;
};

inline AlgebraicCurvature model_geometry(const std::string& kind, const ModelParams& p) {
    AlgebraicCurvature R;
    if (kind == "flat")
        R = flat(p.N);
    else if (kind == "sphere")
        R = sphere(p.N, p.radius);
    else if (kind == "product_spheres")
        R = product_spheres(p.n1, p.r1, p.n2, p.r2);
    else if (kind == "components")
        R = AlgebraicCurvature(p.N, p.components);
    else
        throw std::invalid_argument("unsupported geometry kind '" + kind + "'");
    if (p.require_expansion_dimension && R.N() < 6)
        throw std::invalid_argument("expansion fixtures need dimension >= 6, got " + std::to_string(R.N()));
    require_symmetries(R);
    return R;
}

// Sum of Kulkarni-Nomizu squares of random symmetric matrices; always an
// algebraic curvature tensor.
template <class Rng>
AlgebraicCurvature random_curvature(int N, Rng& rng, int terms = 3) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    AlgebraicCurvature R(N);
    for (int t = 0; t < terms; ++t) {
        Matrix A(N, N);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j <= i; ++j) A(i, j) = A(j, i) = gauss(rng);
        AlgebraicCurvature P = kulkarni_nomizu(A, A);
        if (t % 2 == 1) P *= -1.0;
        R += P;
    }
    return R;
}

} // namespace yamabe::curvature
