#pragma once

// Reduced energy E~(d, xi) = c2 d^2 h - c3 d^4 |W|^2, its maximizers over a
// sampled field, and blow-up predictions along mu(d) = d sqrt(eps) (N >= 7) or
// d l^{-1}(eps) with l(mu) = -mu^2 ln mu (N = 6).

#include "yamabe/curvature.hpp"
#include "yamabe/energy.hpp"
#include "yamabe/errors.hpp"
#include "yamabe/integrals.hpp"
#include "yamabe/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace yamabe::reduction {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

struct ReducedConstants {
    int N = 0;
    double c2 = 0.0;
    double c3 = 0.0;
    int gamma = 0; // 1 if N = 6
};

inline ReducedConstants constants(int N) {
    if (N < 6) throw std::invalid_argument("reduced energy is stated for N >= 6, got " + std::to_string(N));
    const double n = N, K = integrals::K_pow(N);
    ReducedConstants c;
    c.N = N;
    if (N == 6) {
        c.c2 = 5.0 / 24.0 * K;
        c.c3 = 0.8 * integrals::omega(5);
        c.gamma = 1;
    } else {
        c.c2 = 2 * (n - 1) * K / (n * (n - 2) * (n - 4));
        c.c3 = K / (24 * n * (n - 4) * (n - 6));
    }
    return c;
}

struct PointData {
    double h = 0.0;
    double W2 = 0.0;
};

// h / |W|; +inf for W2 = 0 < h; 0 for h <= 0 (not competing)
inline double E_ratio(double h, double W2) {
    if (W2 < 0.0) throw std::invalid_argument("|W|^2 must be >= 0");
    if (!(h > 0.0)) return 0.0;
    if (W2 == 0.0) return infinity;
    return h / std::sqrt(W2);
}

inline double tilde_E(double d, const PointData& xi, const ReducedConstants& c) {
    if (!(d > 0.0)) throw std::invalid_argument("d must be positive");
    return c.c2 * d * d * xi.h - c.c3 * d * d * d * d * xi.W2;
}

inline double d_star(const PointData& xi, const ReducedConstants& c) {
    if (!(xi.h > 0.0)) throw std::domain_error("d_star needs h > 0");
    if (xi.W2 < 0.0) throw std::invalid_argument("|W|^2 must be >= 0");
    if (xi.W2 == 0.0) return infinity;
    return std::sqrt(c.c2 * xi.h / (2.0 * c.c3 * xi.W2));
}

// l(mu) = -mu^2 ln mu, increasing on (0, e^{-1/2}) onto (0, e^{-1}/2)
inline double l(double mu) {
    if (!(mu > 0.0) || !(mu < std::exp(-0.5))) throw std::domain_error("l is inverted on (0, e^{-1/2}) only");
    return -mu * mu * std::log(mu);
}

inline double l_inverse(double eps) {
    const double top = std::exp(-0.5);
    if (!(eps > 0.0) || !(eps < 0.5 * std::exp(-1.0)))
        throw std::domain_error("eps must lie in (0, e^{-1}/2) for N = 6, got " + std::to_string(eps));
    // bisection on ln mu keeps relative accuracy for tiny eps
    double lo = -800.0, hi = std::log(top);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi), m = std::exp(mid);
        if (-m * m * mid < eps)
            lo = mid;
        else
            hi = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

inline double mu_of_d(double d, double eps, int N) {
    if (!(d > 0.0)) throw std::invalid_argument("d must be positive");
    if (N < 6) throw std::invalid_argument("N must be >= 6");
    if (N == 6) return d * l_inverse(eps);
    if (!(eps > 0.0)) throw std::domain_error("eps must be positive");
    return d * std::sqrt(eps);
}

// (J(mu(d)) - K_N^{-N}/N) / eps^2 * |ln l^{-1}(eps)|^gamma from the closed-form
// total energy; tends to E~(d, xi) as eps -> 0.
inline double rescaled_functional(double d, double eps, const PointData& xi, int N) {
    const auto c = constants(N);
    const double m = N == 6 ? l_inverse(eps) : std::sqrt(eps);
    const double mu = d * m;
    auto dims = DimensionParams::make(N);
    auto geo = curvature::LocalGeometry::from_scalars(dims, 0.0, 0.0, xi.W2, 0.0, xi.h);
    auto e = energy::total_energy(geo);
    e.c_const = 0.0; // subtracting it afterwards would cancel the O(eps^2) excess
    const double excess = e.evaluate(mu, eps);
    return excess / (eps * eps) * std::pow(std::abs(std::log(m)), c.gamma);
}

struct ReducedEnergyField {
    std::vector<std::vector<double>> coords; // may be empty: index order is then the only structure
    std::vector<double> h_vals;
    std::vector<double> W2_vals;

    std::size_t size() const { return h_vals.size(); }
    void validate() const {
        if (h_vals.empty()) throw std::invalid_argument("field has no points");
        if (W2_vals.size() != h_vals.size()) throw std::invalid_argument("h and W2 sample counts differ");
        if (!coords.empty() && coords.size() != h_vals.size())
            throw std::invalid_argument("coordinate count differs from sample count");
        for (std::size_t i = 0; i < coords.size(); ++i)
            if (coords[i].size() != coords[0].size()) throw std::invalid_argument("coordinates have mixed dimensions");
        for (double w : W2_vals)
            if (!(w >= 0.0)) throw std::invalid_argument("|W|^2 samples must be >= 0");
        for (double v : h_vals)
            if (!std::isfinite(v)) throw std::invalid_argument("h samples must be finite");
    }
    PointData at(std::size_t i) const { return {h_vals.at(i), W2_vals.at(i)}; }
};

enum class Kind { max_in_d_and_xi, saddle, boundary };

inline const char* kind_name(Kind k) {
    switch (k) {
    case Kind::max_in_d_and_xi: return "max-in-d-and-xi";
    case Kind::saddle: return "saddle";
    case Kind::boundary: return "boundary";
    }
    return "?";
}

struct CriticalPoint {
    std::size_t xi_index = 0;
    double d = 0.0;
    double tildeE = 0.0;
    double E = 0.0;
    Kind kind = Kind::max_in_d_and_xi;
    bool in_max_band = false;        // belongs to {E = max E}, the certified stable set
    bool stability_certified = false;
    std::vector<double> refined_coords;
};

struct RefineOptions {
    double tie_rel = 1e-9;
    bool refine = true;
};

struct CriticalSet {
    std::vector<CriticalPoint> points;         // local maxima and saddles of E over the grid
    std::vector<std::size_t> max_band;         // indices into points with in_max_band
    std::vector<std::size_t> infinite_points;  // field indices with h > 0 and W2 = 0
    double E_max = 0.0;
};

namespace detail {
// Axis neighbours: points that differ from i in exactly one coordinate, nearest on each side.
struct AxisNeighbours {
    std::vector<std::optional<std::size_t>> lower, upper;
};

inline AxisNeighbours axis_neighbours(const ReducedEnergyField& f, std::size_t i) {
    AxisNeighbours nb;
    if (f.coords.empty()) {
        nb.lower.push_back(i > 0 ? std::optional<std::size_t>(i - 1) : std::nullopt);
        nb.upper.push_back(i + 1 < f.size() ? std::optional<std::size_t>(i + 1) : std::nullopt);
        return nb;
    }
    const std::size_t dim = f.coords[0].size();
    nb.lower.assign(dim, std::nullopt);
    nb.upper.assign(dim, std::nullopt);
    const auto& ci = f.coords[i];
    for (std::size_t a = 0; a < dim; ++a) {
        double best_lo = infinity, best_hi = infinity;
        for (std::size_t j = 0; j < f.size(); ++j) {
            if (j == i) continue;
            const auto& cj = f.coords[j];
            bool same = true;
            for (std::size_t b = 0; b < dim && same; ++b)
                if (b != a && std::abs(cj[b] - ci[b]) > 1e-12 * (1.0 + std::abs(ci[b]))) same = false;
            if (!same) continue;
            const double delta = cj[a] - ci[a];
            if (delta < 0.0 && -delta < best_lo) {
                best_lo = -delta;
                nb.lower[a] = j;
            } else if (delta > 0.0 && delta < best_hi) {
                best_hi = delta;
                nb.upper[a] = j;
            }
        }
    }
    return nb;
}
} // namespace detail

inline CriticalSet find_critical_set(const ReducedEnergyField& field, const ReducedConstants& c,
                                     const RefineOptions& opt = {}) {
    field.validate();
    const std::size_t n = field.size();
    std::vector<double> E(n);
    bool any_positive = false, any_finite = false;
    CriticalSet out;
    for (std::size_t i = 0; i < n; ++i) {
        E[i] = E_ratio(field.h_vals[i], field.W2_vals[i]);
        if (field.h_vals[i] > 0.0) any_positive = true;
        if (field.h_vals[i] > 0.0 && field.W2_vals[i] > 0.0) any_finite = true;
        if (std::isinf(E[i])) out.infinite_points.push_back(i);
    }
    if (!any_positive) throw NoCompetingPointsError("no positive-h points: E vanishes on the whole field");
    if (!any_finite)
        throw NoCompetingPointsError("every positive-h point has |W|^2 = 0, so d_star is infinite everywhere");
    // infinite points are reported separately and do not compete at finite mu
    auto finite_E = [&](std::size_t j) { return std::isinf(E[j]) ? -infinity : E[j]; };
    double Emax = 0.0;
    for (std::size_t i = 0; i < n; ++i) Emax = std::max(Emax, finite_E(i));
    out.E_max = Emax;

    for (std::size_t i = 0; i < n; ++i) {
        if (!(field.h_vals[i] > 0.0) || std::isinf(E[i])) continue;
        const auto nb = detail::axis_neighbours(field, i);
        bool max_all = true, on_boundary = false, max_some = false, min_some = false;
        for (std::size_t a = 0; a < nb.lower.size(); ++a) {
            bool max_a = true, min_a = true;
            for (const auto& j : {nb.lower[a], nb.upper[a]}) {
                if (!j) {
                    on_boundary = true;
                    continue;
                }
                if (finite_E(*j) > E[i]) max_a = false;
                if (finite_E(*j) < E[i]) min_a = false;
            }
            max_all = max_all && max_a;
            const bool two_sided = nb.lower[a] && nb.upper[a];
            if (two_sided && max_a) max_some = true;
            if (two_sided && min_a && !max_a) min_some = true;
        }
        const bool in_band = E[i] >= Emax * (1.0 - opt.tie_rel);
        Kind kind;
        if (max_all || in_band)
            kind = on_boundary ? Kind::boundary : Kind::max_in_d_and_xi;
        else if (max_some && min_some)
            kind = Kind::saddle;
        else
            continue;
        CriticalPoint p;
        p.xi_index = i;
        p.E = E[i];
        p.d = d_star(field.at(i), c);
        p.tildeE = tilde_E(p.d, field.at(i), c);
        p.kind = kind;
        p.in_max_band = in_band;
        p.stability_certified = in_band;
        if (!field.coords.empty()) {
            p.refined_coords = field.coords[i];
            if (opt.refine && kind != Kind::saddle)
                for (std::size_t a = 0; a < nb.lower.size(); ++a) {
                    if (!nb.lower[a] || !nb.upper[a]) continue;
                    const double em = finite_E(*nb.lower[a]), ep = finite_E(*nb.upper[a]);
                    const double hm = field.coords[i][a] - field.coords[*nb.lower[a]][a];
                    const double hp = field.coords[*nb.upper[a]][a] - field.coords[i][a];
                    if (!std::isfinite(em) || !std::isfinite(ep)) continue;
                    // vertex of the parabola through the three samples
                    const double sm = (E[i] - em) / hm, sp = (ep - E[i]) / hp;
                    const double curv = (sp - sm) / (0.5 * (hm + hp));
                    if (!(curv < 0.0)) continue;
                    const double slope = (sm * hp + sp * hm) / (hm + hp);
                    const double shift = std::clamp(-slope / curv, -0.5 * hm, 0.5 * hp);
                    p.refined_coords[a] += shift;
                }
        }
        out.points.push_back(p);
    }
    for (std::size_t k = 0; k < out.points.size(); ++k)
        if (out.points[k].in_max_band) out.max_band.push_back(k);
    return out;
}

struct PointPrediction {
    std::size_t xi_index = 0;
    std::vector<double> coords;
    double d = 0.0;
    double mu = 0.0;
    double peak = 0.0; // U_mu(0) = mu^{-(N-2)/2} [N(N-2)]^{(N-2)/4}
    double tildeE = 0.0;
};

struct EpsRecord {
    double eps = 0.0;
    std::vector<PointPrediction> points;
};

struct BlowupReport {
    int N = 0;
    ReducedConstants consts;
    CriticalSet critical;
    std::vector<EpsRecord> records;
};

inline BlowupReport blowup_report(const ReducedEnergyField& field, const std::vector<double>& eps_list, int N,
                                  const RefineOptions& opt = {}) {
    BlowupReport r;
    r.N = N;
    r.consts = constants(N);
    r.critical = find_critical_set(field, r.consts, opt);
    for (double eps : eps_list) {
        if (!(eps > 0.0)) throw std::invalid_argument("eps values must be positive");
        EpsRecord rec;
        rec.eps = eps;
        for (std::size_t k : r.critical.max_band) {
            const auto& cp = r.critical.points[k];
            PointPrediction p;
            p.xi_index = cp.xi_index;
            p.coords = cp.refined_coords;
            p.d = cp.d;
            p.mu = mu_of_d(cp.d, eps, N);
            p.peak = std::pow(p.mu, -(N - 2) / 2.0) * profiles::bubble_peak(N);
            p.tildeE = cp.tildeE;
            rec.points.push_back(p);
        }
        r.records.push_back(rec);
    }
    return r;
}

} // namespace yamabe::reduction
