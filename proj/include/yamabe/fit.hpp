#pragma once

// Least-squares extraction of expansion coefficients from samples (mu, eps, value).

#include "yamabe/energy.hpp"
#include "yamabe/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace yamabe::fit {

using energy::EnergyExpansion;

struct Sample {
    double mu = 0.0;
    double eps = 0.0;
    double value = 0.0;
};

struct Basis {
    bool constant = true;
    bool mu2 = true;
    bool mu4 = true;
    bool mu4log = false;
    bool eps_mu2 = true;

    int active() const { return int(constant) + int(mu2) + int(mu4) + int(mu4log) + int(eps_mu2); }

    static Basis for_dimension(int N) {
        Basis b;
        b.mu4log = N == 6;
        return b;
    }
};

struct FitResult {
    EnergyExpansion coeffs; // inactive columns are 0
    double condition_number = 0.0;
    double max_rel_residual = 0.0; // max |residual| / max |value - c_const|
    double max_abs_residual = 0.0;
    int rank = 0;
};

namespace detail {
inline std::vector<double> row(const Basis& b, double mu, double eps) {
    const double m2 = mu * mu, m4 = m2 * m2;
    std::vector<double> r;
    if (b.constant) r.push_back(1.0);
    if (b.mu2) r.push_back(m2);
    if (b.mu4) r.push_back(m4);
    if (b.mu4log) r.push_back(m4 * std::log(mu));
    if (b.eps_mu2) r.push_back(eps * m2);
    return r;
}
} // namespace detail

// Columns are scaled to unit norm before the solve; the reported condition
// number is that of the scaled design matrix.
inline FitResult fit_expansion(const std::vector<Sample>& samples, const Basis& basis) {
    const int k = basis.active();
    if (k == 0) throw std::invalid_argument("fit needs at least one basis function");
    const int n = int(samples.size());
    for (const auto& s : samples)
        if (!(s.mu > 0.0) || !std::isfinite(s.value)) throw std::invalid_argument("samples need mu > 0 and finite values");
    Eigen::MatrixXd A(n, k);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const auto r = detail::row(basis, samples[i].mu, samples[i].eps);
        for (int j = 0; j < k; ++j) A(i, j) = r[j];
        y[i] = samples[i].value;
    }
    Eigen::VectorXd scale(k);
    for (int j = 0; j < k; ++j) {
        scale[j] = A.col(j).norm();
        if (scale[j] == 0.0) scale[j] = 1.0;
        A.col(j) /= scale[j];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double tol = std::max(n, k) * std::numeric_limits<double>::epsilon() * 1e3 * (sv.size() ? sv[0] : 0.0);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] > tol) ++rank;
    if (rank < k)
        throw RankDeficiencyError("design matrix has rank " + std::to_string(rank) + " < " + std::to_string(k) +
                                  " active basis functions on the sampled grid");
    if (n < 2 * k)
        throw std::invalid_argument("fit needs at least " + std::to_string(2 * k) + " samples, got " + std::to_string(n));
    double lo = samples[0].mu, hi = lo;
    for (const auto& s : samples) {
        lo = std::min(lo, s.mu);
        hi = std::max(hi, s.mu);
    }
    if (hi < 10.0 * lo * (1 - 1e-12)) throw std::invalid_argument("sampled mu values must span at least one decade");

    const Eigen::VectorXd c = svd.solve(y);
    FitResult out;
    out.rank = rank;
    out.condition_number = sv[0] / sv[k - 1];
    std::vector<double> coef(k);
    for (int j = 0; j < k; ++j) coef[j] = c[j] / scale[j];
    int j = 0;
    if (basis.constant) out.coeffs.c_const = coef[j++];
    if (basis.mu2) out.coeffs.c_mu2 = coef[j++];
    if (basis.mu4) out.coeffs.c_mu4 = coef[j++];
    if (basis.mu4log) out.coeffs.c_mu4log = coef[j++];
    if (basis.eps_mu2) out.coeffs.c_eps_mu2 = coef[j++];
    const Eigen::VectorXd res = A * c - y;
    double ymax = 0.0;
    for (int i = 0; i < n; ++i) ymax = std::max(ymax, std::abs(y[i] - out.coeffs.c_const));
    out.max_abs_residual = res.cwiseAbs().maxCoeff();
    out.max_rel_residual = ymax > 0.0 ? out.max_abs_residual / ymax : 0.0;
    return out;
}

struct Slope {
    double slope = 0.0;
    double intercept = 0.0;
};

// Least-squares slope of ln|value| against ln mu.
inline Slope loglog_slope(const std::vector<double>& mus, const std::vector<double>& values) {
    if (mus.size() != values.size() || mus.size() < 2) throw std::invalid_argument("slope fit needs >= 2 paired samples");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < mus.size(); ++i) {
        if (!(mus[i] > 0.0) || values[i] == 0.0 || !std::isfinite(values[i]))
            throw std::invalid_argument("slope fit needs mu > 0 and finite nonzero values");
        const double x = std::log(mus[i]), v = std::log(std::abs(values[i]));
        sx += x;
        sy += v;
        sxx += x * x;
        sxy += x * v;
    }
    const double m = double(mus.size()), den = m * sxx - sx * sx;
    if (!(std::abs(den) > 0.0)) throw RankDeficiencyError("slope fit needs at least two distinct mu values");
    Slope s;
    s.slope = (m * sxy - sx * sy) / den;
    s.intercept = (sy - s.slope * sx) / m;
    return s;
}

// count logarithmically spaced points over [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, int count = 8) {
    if (!(lo > 0.0) || !(hi > lo) || count < 2) throw std::invalid_argument("log grid needs 0 < lo < hi and count >= 2");
    std::vector<double> g(count);
    for (int i = 0; i < count; ++i) g[i] = lo * std::pow(hi / lo, double(i) / (count - 1));
    return g;
}

} // namespace yamabe::fit
