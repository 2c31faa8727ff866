#pragma once

// Adaptive Gauss-Kronrod (7/15) integration with global error control.
// The vector form integrates several integrands sharing one set of nodes;
// each component must meet its own tolerance.

#include "yamabe/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace yamabe::quad {

struct Options {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    int max_intervals = 4000;
    bool throw_on_failure = true;
    // Tolerance floor relative to int |f|, for components that cancel internally.
    double abs_scale_floor = 0.0;
    // Optional per-component absolute tolerances; empty means abs_tol for all.
    std::vector<double> component_abs_tol;
};

struct Result {
    double value = 0.0;
    double abs_error = 0.0;
    int evaluations = 0;
    bool converged = true;
};

namespace detail {

inline constexpr std::array<double, 8> xgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> wgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the nodes xgk[1], xgk[3], xgk[5], xgk[7].
inline constexpr std::array<double, 4> wg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a, b;
    std::vector<double> val, err, absval;
    bool splittable = true;
};

// f(x, out) writes m values at x.
template <class F>
Segment kronrod(F& f, std::size_t m, double a, double b, std::vector<double>& scratch) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    Segment s{a, b, std::vector<double>(m, 0.0), std::vector<double>(m, 0.0),
              std::vector<double>(m, 0.0)};
    scratch.assign(15 * m, 0.0);
    f(c, &scratch[0]);
    for (int j = 0; j < 7; ++j) {
        f(c - h * xgk[j], &scratch[(1 + 2 * j) * m]);
        f(c + h * xgk[j], &scratch[(2 + 2 * j) * m]);
    }
    const double eps = std::numeric_limits<double>::epsilon();
    for (std::size_t k = 0; k < m; ++k) {
        const double fc = scratch[k];
        double resk = wgk[7] * fc, resg = wg[3] * fc, resabs = wgk[7] * std::abs(fc);
        for (int j = 0; j < 7; ++j) {
            const double f1 = scratch[(1 + 2 * j) * m + k], f2 = scratch[(2 + 2 * j) * m + k];
            resk += wgk[j] * (f1 + f2);
            resabs += wgk[j] * (std::abs(f1) + std::abs(f2));
            if (j % 2 == 1) resg += wg[j / 2] * (f1 + f2);
        }
        const double mean = 0.5 * resk;
        double resasc = wgk[7] * std::abs(fc - mean);
        for (int j = 0; j < 7; ++j)
            resasc += wgk[j] * (std::abs(scratch[(1 + 2 * j) * m + k] - mean) +
                                std::abs(scratch[(2 + 2 * j) * m + k] - mean));
        resk *= h;
        resg *= h;
        resabs *= std::abs(h);
        resasc *= std::abs(h);
        double e = std::abs(resk - resg);
        if (resasc != 0.0 && e != 0.0) e = resasc * std::min(1.0, std::pow(200.0 * e / resasc, 1.5));
        if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) e = std::max(50.0 * eps * resabs, e);
        if (!std::isfinite(resk)) e = std::numeric_limits<double>::infinity();
        s.val[k] = resk;
        s.err[k] = e;
        s.absval[k] = resabs;
    }
    s.splittable = std::abs(b - a) > 64.0 * eps * std::max(std::abs(a), std::abs(b));
    return s;
}

} // namespace detail

// Integrates m components over [a, b]; f(x, double* out).
template <class F>
std::vector<Result> integrate_many(F f, std::size_t m, double a, double b, const Options& opt = {}) {
    std::vector<Result> out(m);
    if (a == b) return out;
    std::vector<double> scratch;
    std::vector<detail::Segment> segs;
    segs.push_back(detail::kronrod(f, m, a, b, scratch));
    int evals = 15;
    std::vector<double> total(m), errsum(m), abssum(m), tol(m);
    bool converged = false;
    while (true) {
        std::fill(total.begin(), total.end(), 0.0);
        std::fill(errsum.begin(), errsum.end(), 0.0);
        std::fill(abssum.begin(), abssum.end(), 0.0);
        for (const auto& s : segs)
            for (std::size_t k = 0; k < m; ++k) {
                total[k] += s.val[k];
                errsum[k] += s.err[k];
                abssum[k] += s.absval[k];
            }
        bool ok = true;
        for (std::size_t k = 0; k < m; ++k) {
            const double at = k < opt.component_abs_tol.size() ? opt.component_abs_tol[k] : opt.abs_tol;
            tol[k] = std::max({at, opt.rel_tol * std::abs(total[k]), opt.abs_scale_floor * abssum[k],
                               std::numeric_limits<double>::min()});
            if (!(errsum[k] <= tol[k])) ok = false;
        }
        if (ok) {
            converged = true;
            break;
        }
        if (int(segs.size()) >= opt.max_intervals) break;
        std::size_t best = segs.size();
        double best_score = -1.0;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            if (!segs[i].splittable) continue;
            double score = 0.0;
            for (std::size_t k = 0; k < m; ++k) score = std::max(score, segs[i].err[k] / tol[k]);
            if (score > best_score) {
                best_score = score;
                best = i;
            }
        }
        if (best == segs.size()) break;
        const double lo = segs[best].a, hi = segs[best].b, mid = 0.5 * (lo + hi);
        segs[best] = detail::kronrod(f, m, lo, mid, scratch);
        segs.push_back(detail::kronrod(f, m, mid, hi, scratch));
        evals += 30;
    }
    for (std::size_t k = 0; k < m; ++k) out[k] = Result{total[k], errsum[k], evals, converged};
    if (!converged && opt.throw_on_failure) {
        std::size_t worst = 0;
        for (std::size_t k = 1; k < m; ++k)
            if (errsum[k] / tol[k] > errsum[worst] / tol[worst]) worst = k;
        char detail[160];
        std::snprintf(detail, sizeof detail, "; worst component %zu: value %.6e, error %.3e, |f| %.3e", worst,
                      total[worst], errsum[worst], abssum[worst]);
        throw QuadratureError("adaptive quadrature did not converge on [" + std::to_string(a) + ", " +
                              std::to_string(b) + "] after " + std::to_string(segs.size()) + " intervals" + detail);
    }
    return out;
}

template <class F>
Result integrate(F f, double a, double b, const Options& opt = {}) {
    auto g = [&f](double x, double* o) { o[0] = f(x); };
    return integrate_many(g, 1, a, b, opt)[0];
}

// [a, b] with 0 < a < b through x = e^t; suited to long power-law ranges.
template <class F>
std::vector<Result> integrate_many_log(F f, std::size_t m, double a, double b, const Options& opt = {}) {
    if (!(a > 0.0) || !(b >= a)) throw std::invalid_argument("log-mapped quadrature needs 0 < a <= b");
    auto g = [&](double t, double* o) {
        const double x = std::exp(t);
        f(x, o);
        for (std::size_t k = 0; k < m; ++k) o[k] *= x;
    };
    return integrate_many(g, m, std::log(a), std::log(b), opt);
}

// [a, inf) through x = a + (1-t)/t.
template <class F>
std::vector<Result> integrate_many_from(F f, std::size_t m, double a, const Options& opt = {}) {
    auto g = [&](double t, double* o) {
        const double x = a + (1.0 - t) / t;
        f(x, o);
        const double jac = 1.0 / (t * t);
        for (std::size_t k = 0; k < m; ++k) o[k] = std::isfinite(o[k]) ? o[k] * jac : 0.0;
    };
    return integrate_many(g, m, 0.0, 1.0, opt);
}

// [a, inf) with a > 0 through x = a e^u, u = (1-t)/t; power-law tails become
// exponentially flat at t -> 0.
template <class F>
std::vector<Result> integrate_many_log_from(F f, std::size_t m, double a, const Options& opt = {}) {
    if (!(a > 0.0)) throw std::invalid_argument("log-mapped tail quadrature needs a > 0");
    auto g = [&](double t, double* o) {
        const double u = (1.0 - t) / t;
        const double x = a * std::exp(u);
        if (!std::isfinite(x)) {
            for (std::size_t k = 0; k < m; ++k) o[k] = 0.0;
            return;
        }
        f(x, o);
        const double jac = x / (t * t);
        for (std::size_t k = 0; k < m; ++k) {
            const double v = o[k] * jac;
            o[k] = std::isfinite(v) ? v : 0.0;
        }
    };
    return integrate_many(g, m, 0.0, 1.0, opt);
}

// [0, R] for radial integrands; R may be +inf. Splits at 1 and maps the outer
// part logarithmically (finite R) or by inversion (infinite R).
template <class F>
std::vector<Result> integrate_many_radial(F f, std::size_t m, double R, const Options& opt = {}) {
    const double split = std::min(1.0, R);
    auto inner = integrate_many(f, m, 0.0, split, opt);
    if (R <= 1.0) return inner;
    auto outer = std::isinf(R) ? integrate_many_log_from(f, m, 1.0, opt) : integrate_many_log(f, m, 1.0, R, opt);
    for (std::size_t k = 0; k < m; ++k) {
        inner[k].value += outer[k].value;
        inner[k].abs_error += outer[k].abs_error;
        inner[k].evaluations += outer[k].evaluations;
        inner[k].converged = inner[k].converged && outer[k].converged;
    }
    return inner;
}

template <class F>
Result integrate_radial(F f, double R, const Options& opt = {}) {
    auto g = [&f](double x, double* o) { o[0] = f(x); };
    return integrate_many_radial(g, 1, R, opt)[0];
}

template <class F>
Result integrate_from(F f, double a, const Options& opt = {}) {
    auto g = [&f](double x, double* o) { o[0] = f(x); };
    return integrate_many_from(g, 1, a, opt)[0];
}

template <class F>
Result integrate_log_from(F f, double a, const Options& opt = {}) {
    auto g = [&f](double x, double* o) { o[0] = f(x); };
    return integrate_many_log_from(g, 1, a, opt)[0];
}

template <class F>
Result integrate_log(F f, double a, double b, const Options& opt = {}) {
    auto g = [&f](double x, double* o) { o[0] = f(x); };
    return integrate_many_log(g, 1, a, b, opt)[0];
}

struct GaussRule {
    std::vector<double> nodes, weights; // on [-1, 1]
};

// Gauss-Legendre nodes by Newton iteration on P_n.
inline GaussRule gauss_legendre(int n) {
    GaussRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double pi = std::acos(-1.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5)), dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        r.weights[i] = r.weights[n - 1 - i] = w;
    }
    return r;
}

} // namespace yamabe::quad
