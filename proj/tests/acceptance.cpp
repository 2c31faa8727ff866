// Acceptance run: one PASS/FAIL line per criterion, each with its measured
// value and wall time. Exit status is nonzero if any line fails.

#include "oracles.hpp"
#include "yamabe/lab.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <unistd.h>

using namespace yamabe;
using lab::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Tracker {
    bool pass = true;
    std::vector<std::string> failures;

    void upper(const std::string& what, double measured, double limit) {
        if (!(measured <= limit)) {
            pass = false;
            std::ostringstream os;
            os << what << " = " << measured << " > " << limit;
            failures.push_back(os.str());
        }
    }
    void require(const std::string& what, bool ok) {
        if (!ok) {
            pass = false;
            failures.push_back(what);
        }
    }
    Outcome done(std::string summary) const {
        if (!failures.empty()) summary += "; first failure: " + failures.front();
        return {pass, summary};
    }
};

double rel(double got, double want) { return want == 0.0 ? std::abs(got) : std::abs(got - want) / std::abs(want); }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

int jobs() { return int(std::max(1u, std::thread::hardware_concurrency())); }

const double pi3 = std::pow(std::numbers::pi, 3);

// ---------------------------------------------------------------------------

Outcome integral_calculus() {
    Tracker t;
    double qworst = 0.0, cworst = 0.0;
    for (int N = 6; N <= 12; ++N) {
        const double n = N;
        const auto c = integrals::closed_chain(N);
        t.upper("N=" + std::to_string(N) + " lower recurrence", c.defect_below, 1e-12);
        t.upper("N=" + std::to_string(N) + " upper recurrence", c.defect_above, 1e-12);
        cworst = std::max({cworst, c.defect_below, c.defect_above});
        std::vector<double> qs = {n / 2 - 1, n / 2, n / 2 + 1};
        if (N >= 7) {
            const double top = rel(c.I_top, c.top_ratio * c.I_half);
            t.upper("N=" + std::to_string(N) + " top of chain", top, 1e-12);
            cworst = std::max(cworst, top);
            qs.push_back(n / 2 + 2);
        } else {
            t.upper("N=6 log growth slope", std::abs(c.log_slope - 2.0), 1e-2);
        }
        for (double q : qs) {
            const double e = rel(integrals::I_quadrature(q, n), integrals::I_beta(q, n));
            t.upper("quadrature I(" + fmt(q) + "," + std::to_string(N) + ")", e, 1e-10);
            qworst = std::max(qworst, e);
        }
    }
    return t.done("closed " + fmt(cworst) + " <= 1e-12, quadrature " + fmt(qworst) + " <= 1e-10, N=6..12");
}

Outcome constants() {
    Tracker t;
    double worst = 0.0;
    for (int N = 6; N <= 12; ++N) {
        const double e = rel(integrals::K_pow_alt(N), integrals::K_pow(N));
        worst = std::max(worst, e);
        t.upper("two forms N=" + std::to_string(N), e, 1e-12);
    }
    const double k6 = rel(integrals::K_pow(6), 230.4 * pi3);
    t.upper("K_6^-6 against 230.4 pi^3", k6, 1e-12);
    return t.done("two forms " + fmt(worst) + ", K_6^-6 " + fmt(k6) + " (both <= 1e-12)");
}

Outcome pde_residuals() {
    Tracker t;
    double bub = 0, ker = 0, corr = 0, rate = 0;
    int runs = 0;
    auto run_geometry = [&](int N, const json& geometry) {
        json doc = {{"schema_version", 1}, {"N", N},           {"geometry", geometry},
                    {"lap_S", 0.5},        {"h", 1.0},         {"mu_grid", {1e-2}},
                    {"seed", 3 + N}};
        const auto checks = lab::verify_checks(lab::parse_config(doc));
        std::set<std::string> seen;
        for (const auto& c : checks) {
            if (c.name == "bubble_equation") bub = std::max(bub, c.measured);
            if (c.name == "kernel_equation") ker = std::max(ker, c.measured);
            if (c.name == "correction_equation") corr = std::max(corr, c.measured);
            if (c.name == "correction_fd_rate") rate = std::max(rate, c.measured);
            seen.insert(c.name);
            t.require("N=" + std::to_string(N) + " " + c.name + " measured " + fmt(c.measured), !c.enabled || c.pass);
        }
        for (const char* k : {"bubble_equation", "kernel_equation", "correction_equation", "correction_fd_rate"})
            t.require(std::string("missing check ") + k, seen.count(k) == 1);
        ++runs;
    };
    for (int N = 6; N <= 10; ++N) run_geometry(N, {{"kind", "random"}, {"scale", 1.0}});
    run_geometry(6, {{"kind", "sphere"}, {"radius", 1.0}});
    run_geometry(7, {{"kind", "product_spheres"}, {"n1", 2}, {"r1", 1.0}, {"n2", 5}, {"r2", 1.5}});
    t.upper("bubble", bub, 1e-10);
    t.upper("kernel", ker, 1e-10);
    t.upper("correction", corr, 1e-6);
    t.upper("fd slope deviation", rate, 0.2);
    return t.done("U " + fmt(bub) + ", Phi " + fmt(ker) + " (<= 1e-10); V residual " + fmt(corr) +
                  " <= 1e-6 at step 1e-3; |fd slope - 2| " + fmt(rate) + " <= 0.2; " + std::to_string(runs) +
                  " geometries");
}

double dot(const curvature::AlgebraicCurvature& a, const curvature::AlgebraicCurvature& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.components().size(); ++i) s += a.components()[i] * b.components()[i];
    return s;
}

Outcome curvature_algebra() {
    Tracker t;
    std::mt19937_64 rng(1000);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const int N = 6 + k % 7;
        const auto R = curvature::random_curvature(N, rng, 1 + k % 4);
        const double rm = R.norm_sq();
        t.require("random tensor symmetry", curvature::check_symmetries(R).ok(1e-12 * std::sqrt(rm)));
        const auto g = curvature::decompose(R, DimensionParams::make(N));
        const auto I = curvature::Matrix::Identity(N, N);
        const auto W = curvature::weyl_tensor(R);
        const auto Eg = curvature::kulkarni_nomizu(g.ric - (g.S / N) * I, I);
        const auto gg = curvature::kulkarni_nomizu(I, I);
        const double n = N;
        const double errs[] = {
            std::abs(dot(W, Eg)) / rm,
            std::abs(dot(W, gg)) / rm,
            std::abs(dot(Eg, gg)) / rm,
            std::abs(W.norm_sq() - g.W_norm_sq) / rm,
            std::abs(rm - g.W_norm_sq - 4.0 / (n - 2) * g.E_norm_sq - 2.0 * g.S * g.S / (n * (n - 1))) / rm,
        };
        for (double e : errs) {
            worst = std::max(worst, e);
            t.upper("orthogonality", e, 1e-10);
        }
    }
    const auto s6 = curvature::decompose(curvature::sphere(6), DimensionParams::make(6));
    const double lam = rel(curvature::lambda_g(s6), 300.0), A = rel(curvature::a_g(s6), 23.0 / 72.0);
    t.upper("S^6 Lambda", lam, 1e-13);
    t.upper("S^6 A", A, 1e-13);
    return t.done("1000 tensors worst " + fmt(worst) + " <= 1e-10; S^6 Lambda 300 (" + fmt(lam) + "), A 23/72 (" +
                  fmt(A) + ")");
}

Outcome expansion_assembly() {
    Tracker t;
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double bworst = 0.0, cancel = 0.0, tworst = 0.0;
    auto coef = [&](const std::string& what, double got, double want, double& worst) {
        if (std::isnan(want)) {
            t.require(what + " should be indeterminate", std::isnan(got));
            return;
        }
        const double e = rel(got, want);
        worst = std::max(worst, e);
        t.upper(what, e, 1e-12);
    };
    for (int N = 6; N <= 12; ++N)
        for (int k = 0; k < 10; ++k) {
            const auto R = curvature::random_curvature(N, rng);
            const auto g = curvature::decompose(R, DimensionParams::make(N), u(rng), u(rng));
            const auto got = energy::bubble_energy(g);
            const auto want = oracle::reference_bubble_energy(N, g.W_norm_sq, g.E_norm_sq, g.S, g.h);
            const auto tag = "N=" + std::to_string(N) + " ";
            coef(tag + "const", got.c_const, want.c_const, bworst);
            coef(tag + "mu4", got.c_mu4, want.c_mu4, bworst);
            coef(tag + "mu4log", got.c_mu4log, want.c_mu4log, bworst);
            coef(tag + "eps mu2", got.c_eps_mu2, want.c_eps_mu2, bworst);

            const auto tot = energy::total_energy(g);
            const auto disp = oracle::reference_total_energy(N, g.W_norm_sq, g.h);
            // the E and S parts cancel: what is left must be the W part alone
            const double scale =
                integrals::K_pow(N) * (g.E_norm_sq + g.S * g.S + g.W_norm_sq + std::abs(g.lap_S));
            const double got_w = N == 6 ? tot.c_mu4log : tot.c_mu4, want_w = N == 6 ? disp.c_mu4log : disp.c_mu4;
            const double c = std::abs(got_w - want_w) / scale;
            cancel = std::max(cancel, c);
            t.upper(tag + "cancellation", c, 1e-12);
            coef(tag + "total mu4", got_w, want_w, tworst);
            coef(tag + "total eps mu2", tot.c_eps_mu2, disp.c_eps_mu2, tworst);
            coef(tag + "total const", tot.c_const, disp.c_const, tworst);
        }
    const auto six = energy::total_energy(curvature::LocalGeometry::from_scalars(DimensionParams::make(6), 0, 0, 1.0));
    const auto nine = energy::total_energy(curvature::LocalGeometry::from_scalars(DimensionParams::make(9), 0, 0, 1.0));
    coef("N=6 |W|^2 = 1", six.c_mu4log, 0.8 * pi3, tworst);
    coef("N=9 |W|^2 = 1", nine.c_mu4, -integrals::K_pow(9) / 3240.0, tworst);
    return t.done("bubble coefficients " + fmt(bworst) + ", cancellation " + fmt(cancel) + ", reduced coefficients " +
                  fmt(tworst) + " (all <= 1e-12), N=6..12");
}

json scalar_geometry_config(int N) {
    // curvature c at scale r0: S = c, |E|^2 = |W|^2 = c^2, lap S = 0.3 c^2, h = c
    const double r0 = N == 6 ? 100.0 : 1000.0, c = 5.0 / (r0 * r0);
    return {{"schema_version", 1},
            {"N", N},
            {"geometry", {{"kind", "scalars"}, {"S", c}, {"E2", c * c}, {"W2", c * c}}},
            {"lap_S", 0.3 * c * c},
            {"h", c},
            {"r0", r0},
            {"mu_grid", {{"log", {{"lo", 1e-3}, {"hi", 1e-2}, {"count", 8}}}}},
            {"eps_grid", {0.0, 1e-6, 1e-5}}};
}

Outcome oracle_agreement() {
    Tracker t;
    std::string summary;
    for (int N = 6; N <= 10; ++N) {
        const auto r = lab::run_expand(lab::parse_config(scalar_geometry_config(N)), jobs());
        summary += (N > 6 ? "; " : "") + std::string("N=") + std::to_string(N);
        for (const auto& c : r.checks) {
            if (c.name == "c_const") continue;
            t.require("N=" + std::to_string(N) + " " + c.name + " has a nonvanishing closed form", c.enabled);
            t.upper("N=" + std::to_string(N) + " " + c.name, c.measured, 0.02);
            summary += " " + c.name + " " + fmt(c.measured);
        }
    }
    return t.done(summary + " (each <= 0.02)");
}

Outcome error_rates() {
    Tracker t;
    const auto cfg = lab::load_config(fs::path(YAMABE_SOURCE_DIR) / "configs" / "rates_sweep.json");
    const auto r = lab::run_rates(cfg, jobs());
    std::string summary;
    t.require("five dimensions with two branches each", r.checks.size() == 10);
    for (const auto& c : r.checks) {
        t.upper(c.name, c.measured, 0.15);
        summary += c.name + " " + fmt(c.measured) + " ";
    }
    return t.done("|slope - predicted|: " + summary + "(each <= 0.15)");
}

std::set<std::size_t> brute_max_set(const reduction::ReducedEnergyField& f, double tie_rel) {
    double top = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double e = reduction::E_ratio(f.h_vals[i], f.W2_vals[i]);
        if (std::isfinite(e)) top = std::max(top, e);
    }
    std::set<std::size_t> out;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double e = reduction::E_ratio(f.h_vals[i], f.W2_vals[i]);
        if (std::isfinite(e) && e > 0.0 && e >= top * (1.0 - tie_rel)) out.insert(i);
    }
    return out;
}

reduction::ReducedEnergyField bump_field(int n, std::mt19937_64& rng, bool tie) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double cx = tie ? 0.5 : 0.6 * u(rng), cy = 0.6 * u(rng), w = tie ? 0.3 : 0.4 + 0.4 * std::abs(u(rng));
    reduction::ReducedEnergyField f;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x = -1.0 + 2.0 * i / (n - 1), y = -1.0 + 2.0 * j / (n - 1);
            auto bump = [&](double c) { return std::exp(-((x - c) * (x - c) + (y - cy) * (y - cy)) / (w * w)); };
            // a tie field is even in x, so its maxima come in mirror pairs
            f.coords.push_back({x, y});
            f.h_vals.push_back((tie ? bump(cx) + bump(-cx) : bump(cx)) - 0.2);
            f.W2_vals.push_back(1.0 + 0.5 * (x * x + y * y));
        }
    return f;
}

Outcome reduction_identities() {
    Tracker t;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    double ident = 0.0;
    for (int N = 6; N <= 12; ++N) {
        const auto c = reduction::constants(N);
        for (int k = 0; k < 50; ++k) {
            const reduction::PointData x{u(rng), u(rng)};
            const double E = reduction::E_ratio(x.h, x.W2);
            const double e = rel(reduction::tilde_E(reduction::d_star(x, c), x, c), c.c2 * c.c2 / (4 * c.c3) * E * E);
            ident = std::max(ident, e);
            t.upper("tilde E at d_star", e, 1e-12);
        }
    }
    double trip = 0.0;
    for (double lm = std::log(1e-6); lm <= std::log(0.3); lm += 0.05) {
        const double mu = std::exp(lm);
        trip = std::max({trip, rel(reduction::l_inverse(reduction::l(mu)), mu),
                         rel(reduction::mu_of_d(1.0, reduction::l(mu), 6), mu)});
        for (int N = 7; N <= 10; ++N)
            for (double d : {0.5, 2.0}) trip = std::max(trip, rel(reduction::mu_of_d(d, mu * mu / (d * d), N), mu));
    }
    t.upper("l roundtrip", trip, 1e-10);
    int ties = 0;
    for (int k = 0; k < 20; ++k) {
        const bool tie = k % 4 == 3;
        const auto f = bump_field(15, rng, tie);
        const auto want = brute_max_set(f, 1e-9);
        const auto cs = reduction::find_critical_set(f, reduction::constants(6 + k % 5));
        std::set<std::size_t> got;
        for (std::size_t b : cs.max_band) got.insert(cs.points[b].xi_index);
        t.require("field " + std::to_string(k) + " maximizer set", got == want);
        if (tie) {
            t.require("field " + std::to_string(k) + " has a mirror tie", want.size() == 2);
            ties += want.size() == 2;
        }
    }
    return t.done("identity " + fmt(ident) + " <= 1e-12; roundtrip " + fmt(trip) +
                  " <= 1e-10; 20 fields match brute force (" + std::to_string(ties) + " with ties)");
}

Outcome end_to_end() {
    Tracker t;
    const fs::path config = fs::path(YAMABE_SOURCE_DIR) / "configs" / "blowup_product7.json";
    const fs::path out = fs::temp_directory_path() / ("yamabe_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(out);
    lab::RunOptions opt;
    opt.config = config;
    opt.out = out;
    opt.jobs = jobs();
    std::ostringstream err;
    const int code = lab::run("blowup", opt, err);
    t.require("blowup exit status 0 (" + err.str() + ")", code == 0);
    if (code != 0) {
        fs::remove_all(out);
        return t.done("blowup failed");
    }
    const auto rep = io::read_json(out / "blowup_report.json");
    t.require("landscape written", fs::exists(out / "landscape.csv"));
    fs::remove_all(out);

    const auto cfg = lab::load_config(config);
    const auto field = lab::field_for(cfg);
    std::size_t best = 0;
    double bv = -INFINITY;
    for (std::size_t i = 0; i < field.size(); ++i) {
        if (!(field.h_vals[i] > 0.0) || !(field.W2_vals[i] > 0.0)) continue;
        const double v = field.h_vals[i] / std::sqrt(field.W2_vals[i]);
        if (v > bv) {
            bv = v;
            best = i;
        }
    }
    const int N = cfg.N;
    const auto& recs = rep.at("records");
    t.require("one record per eps", recs.size() == cfg.eps_grid.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < recs.size(); ++k) {
        const auto& pts = recs[k].at("points");
        t.require("a single predicted point", pts.size() == 1);
        if (pts.empty()) continue;
        t.require("predicted point maximizes h/|W|", pts[0].at("xi_index").get<std::size_t>() == best);
        if (k == 0) continue;
        const auto& p0 = recs[0].at("points")[0];
        const double mu_ratio = pts[0].at("mu").get<double>() / p0.at("mu").get<double>();
        const double peak_ratio = pts[0].at("peak").get<double>() / p0.at("peak").get<double>();
        const double e1 = rel(peak_ratio, std::pow(mu_ratio, -(N - 2) / 2.0));
        // for N >= 7 mu is d_star sqrt(eps), so the ratio also follows from the eps grid alone
        const double e2 =
            rel(peak_ratio, std::pow(recs[k].at("eps").get<double>() / recs[0].at("eps").get<double>(), -(N - 2) / 4.0));
        worst = std::max({worst, e1, e2});
        t.upper("peak ratio", std::max(e1, e2), 1e-12);
    }
    return t.done("xi_0 = index " + std::to_string(best) + " (argmax h/|W|), peak ratios " + fmt(worst) +
                  " <= 1e-12 over " + std::to_string(recs.size()) + " eps values");
}

struct Criterion {
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
};

} // namespace

int main() {
    const std::vector<Criterion> all = {
        {"integral calculus", 5, integral_calculus},
        {"constants", 5, constants},
        {"PDE residuals", 10, pde_residuals},
        {"curvature algebra", 5, curvature_algebra},
        {"expansion assembly", 5, expansion_assembly},
        {"oracle agreement", 300, oracle_agreement},
        {"error rates", 600, error_rates},
        {"reduction identities", 5, reduction_identities},
        {"end-to-end blowup", 30, end_to_end},
    };
    int failed = 0;
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.limit_s;
        const bool ok = o.pass && in_time;
        failed += !ok;
        std::printf("%s  %-21s %s [%.2f s, limit %.0f s%s]\n", ok ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                    c.limit_s, in_time ? "" : ", exceeded");
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", int(all.size()) - failed, all.size());
    return failed == 0 ? 0 : 1;
}
