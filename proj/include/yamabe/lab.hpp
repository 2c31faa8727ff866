#pragma once

// Experiment runner behind the yamabe_lab tool: configuration, the verify /
// expand / rates / blowup commands, and their report files.
//
// Exit status: 0 when every enabled check passes, 1 when a check fails or the
// numerics raise, 2 for configuration and file-system errors.

#include "yamabe/curvature.hpp"
#include "yamabe/energy.hpp"
#include "yamabe/energy_model.hpp"
#include "yamabe/errors.hpp"
#include "yamabe/fit.hpp"
#include "yamabe/integrals.hpp"
#include "yamabe/io.hpp"
#include "yamabe/profiles.hpp"
#include "yamabe/reduction.hpp"
#include "yamabe/residual.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace yamabe::lab {

using io::json;
namespace fs = std::filesystem;

inline constexpr int schema_version = 1;

struct GeometrySpec {
    std::string kind = "flat"; // flat | sphere | product_spheres | components | document | random | scalars
    double radius = 1.0;
    int n1 = 0, n2 = 0;
    double r1 = 1.0, r2 = 1.0;
    std::vector<double> components;
    fs::path path;
    double scale = 1.0; // random: Frobenius norm of the tensor
    int terms = 3;
    double S = 0.0, E2 = 0.0, W2 = 0.0; // scalars
};

struct SyntheticField {
    int n1 = 2, n2 = 5;
    int grid = 21;            // points per axis on [-extent, extent]^2
    double extent = 1.0;
    double radius_slope = 0.3; // r1 = 1 + slope x, r2 = 1 + slope y
    std::vector<double> center = {0.0, 0.0};
    double width = 0.5;
    double amplitude = 1.0;
    double offset = 0.2;
};

struct FieldSpec {
    fs::path path;
    std::optional<json> inline_doc;
    std::optional<SyntheticField> synthetic;
};

struct ExperimentConfig {
    int N = 6;
    GeometrySpec geometry;
    double h = 0.0;
    double lap_S = 0.0;
    std::vector<double> grad_S;              // explicit, length N
    std::optional<std::pair<double, double>> grad_S_pattern; // (first, others)
    double r0 = 1.0;
    std::vector<double> mu_grid;
    std::vector<double> eps_grid;
    std::map<std::string, double> tolerances;
    std::uint64_t seed = 0;
    fs::path output_dir = ".";
    std::vector<int> dimensions; // rates sweep; defaults to {N}
    int directions = 64;
    int qmc_samples = 0;         // verify: optional quasi-Monte Carlo cross-check
    std::optional<FieldSpec> field;
    json document; // effective configuration, hashed into every report

    double tol(const std::string& name) const {
        const auto it = tolerances.find(name);
        if (it == tolerances.end()) throw std::logic_error("no tolerance named " + name);
        return it->second;
    }
};

inline const std::map<std::string, double>& default_tolerances() {
    static const std::map<std::string, double> t = {
        {"symmetry", 1e-12},
        {"weyl_orthogonality", 1e-10},
        {"recurrence_closed", 1e-12},
        {"recurrence_quadrature", 1e-10},
        {"constants", 1e-12},
        {"pde_pointwise", 1e-10},
        {"correction_residual", 1e-6},
        {"fd_slope", 0.2},
        {"qmc_rel", 1e-2},
        {"const_rel", 1e-8},
        {"coeff_rel", 0.02},
        {"coeff_rel_log", 0.03},
        {"correction_rel", 0.02},
        {"slope_abs", 0.15},
        {"tie_rel", 1e-9},
    };
    return t;
}

namespace detail {

inline std::vector<double> parse_grid(const json& j, const std::string& name) {
    std::vector<double> g;
    if (j.is_array()) {
        for (const auto& v : j) {
            if (!v.is_number()) throw ConfigError(name + " entries must be numbers");
            g.push_back(v.get<double>());
        }
    } else if (j.is_object() && j.contains("log")) {
        const auto& l = j.at("log");
        const double lo = l.at("lo").get<double>(), hi = l.at("hi").get<double>();
        const int n = l.value("count", 8);
        try {
            g = fit::log_grid(lo, hi, n);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(name + ": " + e.what());
        }
    } else {
        throw ConfigError(name + " must be a list or {\"log\": {\"lo\", \"hi\", \"count\"}}");
    }
    return g;
}

inline GeometrySpec parse_geometry(const json& j, const fs::path& base) {
    GeometrySpec g;
    if (j.is_string()) {
        g.kind = "document";
        g.path = base / j.get<std::string>();
        return g;
    }
    if (!j.is_object()) throw ConfigError("geometry must be an object or a curvature document path");
    g.kind = j.value("kind", std::string("flat"));
    g.radius = j.value("radius", 1.0);
    g.n1 = j.value("n1", 0);
    g.n2 = j.value("n2", 0);
    g.r1 = j.value("r1", 1.0);
    g.r2 = j.value("r2", 1.0);
    if (j.contains("components")) g.components = j.at("components").get<std::vector<double>>();
    if (j.contains("path")) g.path = base / j.at("path").get<std::string>();
    g.scale = j.value("scale", 1.0);
    g.terms = j.value("terms", 3);
    g.S = j.value("S", 0.0);
    g.E2 = j.value("E2", 0.0);
    g.W2 = j.value("W2", 0.0);
    static const std::vector<std::string> kinds = {"flat",     "sphere", "product_spheres", "components",
                                                   "document", "random", "scalars"};
    if (std::find(kinds.begin(), kinds.end(), g.kind) == kinds.end())
        throw ConfigError("unsupported geometry kind '" + g.kind + "'");
    if (g.kind == "document" && g.path.empty()) throw ConfigError("geometry of kind document needs \"path\"");
    if (g.kind == "scalars" && (g.E2 < 0.0 || g.W2 < 0.0)) throw ConfigError("geometry E2 and W2 must be >= 0");
    return g;
}

inline SyntheticField parse_synthetic(const json& j) {
    SyntheticField s;
    const std::string kind = j.value("kind", std::string("product_spheres_bump"));
    if (kind != "product_spheres_bump") throw ConfigError("unsupported synthetic field kind '" + kind + "'");
    s.n1 = j.value("n1", s.n1);
    s.n2 = j.value("n2", s.n2);
    s.grid = j.value("grid", s.grid);
    s.extent = j.value("extent", s.extent);
    s.radius_slope = j.value("radius_slope", s.radius_slope);
    if (j.contains("center")) s.center = j.at("center").get<std::vector<double>>();
    s.width = j.value("width", s.width);
    s.amplitude = j.value("amplitude", s.amplitude);
    s.offset = j.value("offset", s.offset);
    if (s.n1 < 2 || s.n2 < 2) throw ConfigError("synthetic factors need dimension >= 2");
    if (s.grid < 2 || s.center.size() != 2 || !(s.width > 0.0) || !(s.extent > 0.0))
        throw ConfigError("synthetic field needs grid >= 2, a 2-d center, width > 0 and extent > 0");
    if (!(1.0 - s.radius_slope * s.extent > 0.0)) throw ConfigError("synthetic radii must stay positive on the grid");
    return s;
}

} // namespace detail

// base: directory against which relative input paths are resolved.
inline ExperimentConfig parse_config(const json& doc, const fs::path& base = ".") {
    if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
    ExperimentConfig c;
    try {
        const int version = doc.value("schema_version", schema_version);
        if (version != schema_version)
            throw ConfigError("unsupported schema_version " + std::to_string(version) + " (expected " +
                              std::to_string(schema_version) + ")");
        if (!doc.contains("N")) throw ConfigError("configuration needs \"N\"");
        c.N = doc.at("N").get<int>();
        if (c.N < 6) throw ConfigError("N must be >= 6, got " + std::to_string(c.N));
        if (doc.contains("geometry")) c.geometry = detail::parse_geometry(doc.at("geometry"), base);
        if (doc.contains("h")) {
            const auto& h = doc.at("h");
            if (h.is_number())
                c.h = h.get<double>();
            else if (h.is_object() && h.contains("field")) {
                FieldSpec f;
                f.path = base / h.at("field").get<std::string>();
                c.field = f;
            } else
                throw ConfigError("h must be a number or {\"field\": path}");
        }
        c.lap_S = doc.value("lap_S", 0.0);
        if (doc.contains("grad_S")) {
            const auto& g = doc.at("grad_S");
            if (g.is_array())
                c.grad_S = g.get<std::vector<double>>();
            else if (g.is_object())
                c.grad_S_pattern = std::pair{g.value("first", 0.0), g.value("others", 0.0)};
            else
                throw ConfigError("grad_S must be a list or {\"first\", \"others\"}");
        }
        c.r0 = doc.value("r0", 1.0);
        if (!(c.r0 > 0.0)) throw ConfigError("r0 must be positive");
        if (!doc.contains("mu_grid")) throw ConfigError("configuration needs \"mu_grid\"");
        c.mu_grid = detail::parse_grid(doc.at("mu_grid"), "mu_grid");
        if (c.mu_grid.empty()) throw ConfigError("mu_grid is empty");
        for (double m : c.mu_grid)
            if (!(m > 0.0)) throw ConfigError("mu_grid values must be positive");
        c.eps_grid = doc.contains("eps_grid") ? detail::parse_grid(doc.at("eps_grid"), "eps_grid") : std::vector<double>{0.0};
        if (c.eps_grid.empty()) throw ConfigError("eps_grid is empty");
        for (double e : c.eps_grid)
            if (!(e >= 0.0)) throw ConfigError("eps_grid values must be >= 0");
        c.tolerances = default_tolerances();
        if (doc.contains("tolerances")) {
            for (const auto& [k, v] : doc.at("tolerances").items()) {
                if (!c.tolerances.count(k)) throw ConfigError("unknown tolerance '" + k + "'");
                if (!v.is_number() || !(v.get<double>() > 0.0)) throw ConfigError("tolerance '" + k + "' must be positive");
                c.tolerances[k] = v.get<double>();
            }
        }
        c.seed = doc.value("seed", std::uint64_t(0));
        c.output_dir = doc.value("output_dir", std::string("."));
        if (doc.contains("rates")) {
            const auto& r = doc.at("rates");
            if (r.contains("dimensions")) c.dimensions = r.at("dimensions").get<std::vector<int>>();
            c.directions = r.value("directions", c.directions);
            if (c.directions < 2) throw ConfigError("rates.directions must be >= 2");
            for (int n : c.dimensions)
                if (n < 6) throw ConfigError("rates.dimensions entries must be >= 6");
        }
        c.qmc_samples = doc.value("qmc_samples", 0);
        if (doc.contains("field")) {
            const auto& f = doc.at("field");
            FieldSpec fs;
            if (f.contains("path"))
                fs.path = base / f.at("path").get<std::string>();
            else if (f.contains("points"))
                fs.inline_doc = f;
            else if (f.contains("synthetic"))
                fs.synthetic = detail::parse_synthetic(f.at("synthetic"));
            else
                throw ConfigError("field needs \"path\", \"points\" or \"synthetic\"");
            c.field = fs;
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("configuration field has the wrong type: ") + e.what());
    }
    c.document = doc;
    c.document["seed"] = c.seed;
    return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
    return parse_config(io::read_json(path), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

inline std::string config_hash(const ExperimentConfig& c) { return io::sha256_hex(io::dump(c.document, 0)); }

// ---------------------------------------------------------------------------
// Geometry resolution

inline curvature::AlgebraicCurvature tensor_for(const ExperimentConfig& c, int N, bool require_symmetric = true) {
    const auto& g = c.geometry;
    curvature::AlgebraicCurvature R;
    if (g.kind == "flat")
        R = curvature::flat(N);
    else if (g.kind == "sphere")
        R = curvature::sphere(N, g.radius);
    else if (g.kind == "product_spheres")
        R = curvature::product_spheres(g.n1, g.r1, g.n2, g.r2);
    else if (g.kind == "components")
        R = curvature::AlgebraicCurvature(N, g.components);
    else if (g.kind == "document")
        R = io::curvature_from_json(io::read_json(g.path));
    else if (g.kind == "random") {
        std::mt19937_64 rng(c.seed + std::uint64_t(N));
        R = curvature::random_curvature(N, rng, g.terms);
        if (R.norm_sq() > 0.0) R *= g.scale / std::sqrt(R.norm_sq());
    } else
        throw ConfigError("geometry kind '" + g.kind + "' has no curvature tensor");
    if (R.N() != N)
        throw ConfigError("geometry has dimension " + std::to_string(R.N()) + " but N = " + std::to_string(N));
    if (require_symmetric) {
        try {
            curvature::require_symmetries(R, c.tol("symmetry"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("geometry: ") + e.what());
        }
    }
    return R;
}

inline curvature::LocalGeometry local_geometry(const ExperimentConfig& c) {
    const auto dims = DimensionParams::make(c.N, c.r0);
    if (c.geometry.kind == "scalars")
        return curvature::LocalGeometry::from_scalars(dims, c.geometry.S, c.geometry.E2, c.geometry.W2, c.lap_S, c.h);
    return curvature::decompose(tensor_for(c, c.N), dims, c.lap_S, c.h);
}

inline curvature::Vector grad_S_for(const ExperimentConfig& c, int N) {
    curvature::Vector g = curvature::Vector::Zero(N);
    if (!c.grad_S.empty()) {
        if (int(c.grad_S.size()) != N)
            throw ConfigError("grad_S has " + std::to_string(c.grad_S.size()) + " entries, N = " + std::to_string(N));
        for (int i = 0; i < N; ++i) g[i] = c.grad_S[i];
    } else if (c.grad_S_pattern) {
        g.setConstant(c.grad_S_pattern->second);
        g[0] = c.grad_S_pattern->first;
    }
    return g;
}

// ---------------------------------------------------------------------------
// Checks and parallel execution

struct Check {
    std::string name;
    double measured = 0.0;
    double threshold = 0.0;
    bool pass = false;
    bool enabled = true;
    std::string note;

    json to_json() const {
        json j = {{"name", name}, {"measured", io::number(measured)}, {"threshold", threshold}, {"pass", pass},
                  {"enabled", enabled}};
        if (!note.empty()) j["note"] = note;
        return j;
    }
};

inline Check upper_check(std::string name, double measured, double threshold, std::string note = {}) {
    return {std::move(name), measured, threshold, measured <= threshold, true, std::move(note)};
}

inline bool all_pass(const std::vector<Check>& cs) {
    return std::all_of(cs.begin(), cs.end(), [](const Check& c) { return !c.enabled || c.pass; });
}

inline json checks_json(const std::vector<Check>& cs) {
    json a = json::array();
    for (const auto& c : cs) a.push_back(c.to_json());
    return a;
}

// Runs f(i) for i in [0, n) on up to jobs threads; the first exception is rethrown.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& f) {
    const int workers = std::max(1, std::min<int>(jobs, int(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex m;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lk(m);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

struct RunOptions {
    fs::path config;
    std::optional<fs::path> out;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
};

struct Context {
    ExperimentConfig cfg;
    fs::path out;
    std::string hash;
    int jobs = 1;

    json header(const std::string& command) const {
        json tol = json::object();
        for (const auto& [k, v] : cfg.tolerances) tol[k] = v;
        return {{"command", command}, {"config_hash", hash}, {"schema_version", schema_version},
                {"tolerances", tol},   {"N", cfg.N},          {"seed", cfg.seed}};
    }
    void write(const std::string& name, const std::string& text) const { io::write_text(out / name, text); }
};

inline Context make_context(const RunOptions& opt) {
    Context ctx;
    json doc = io::read_json(opt.config);
    if (opt.seed) doc["seed"] = *opt.seed;
    const fs::path base = opt.config.parent_path().empty() ? fs::path(".") : opt.config.parent_path();
    ctx.cfg = parse_config(doc, base);
    ctx.out = opt.out ? *opt.out : ctx.cfg.output_dir;
    if (!fs::is_directory(ctx.out))
        throw fs::filesystem_error("output directory does not exist", ctx.out,
                                   std::make_error_code(std::errc::no_such_file_or_directory));
    ctx.hash = config_hash(ctx.cfg);
    ctx.jobs = std::max(1, opt.jobs);
    return ctx;
}

// ---------------------------------------------------------------------------
// verify

inline std::vector<Check> verify_checks(const ExperimentConfig& c) {
    std::vector<Check> out;
    const int N = c.N;
    const auto dims = DimensionParams::make(N, c.r0);
    const double n = N;

    curvature::LocalGeometry geo;
    bool have_geo = true;
    if (c.geometry.kind == "scalars") {
        geo = local_geometry(c);
    } else {
        const auto R = tensor_for(c, N, false);
        const double scale = std::max(1.0, std::sqrt(R.norm_sq()));
        const auto sym = curvature::check_symmetries(R);
        out.push_back(upper_check("riemann_symmetry", sym.worst() / scale, c.tol("symmetry")));
        if (!out.back().pass) have_geo = false;
        geo = curvature::decompose(R, dims, c.lap_S, c.h);
        const double w_direct = curvature::weyl_tensor(R).norm_sq();
        const double rm = std::max(1.0, geo.rm_norm_sq);
        out.push_back(upper_check("weyl_orthogonality", std::abs(w_direct - geo.W_norm_sq) / rm, c.tol("weyl_orthogonality"),
                                  "|W|^2 from the explicit tensor against the orthogonal split"));
        const double e_direct = (geo.ric - (geo.S / n) * curvature::Matrix::Identity(N, N)).squaredNorm();
        out.push_back(upper_check("ricci_split", std::abs(e_direct - geo.E_norm_sq) / rm, c.tol("weyl_orthogonality")));
    }

    // integral calculus
    const auto chain = integrals::closed_chain(N, c.r0);
    out.push_back(upper_check("recurrence_below", chain.defect_below, c.tol("recurrence_closed")));
    out.push_back(upper_check("recurrence_above", chain.defect_above, c.tol("recurrence_closed")));
    double qerr = 0.0;
    for (double q : {n / 2 - 1, n / 2, n / 2 + 1}) {
        const double exact = integrals::I_beta(q, n), num = integrals::I_quadrature(q, n);
        qerr = std::max(qerr, std::abs(num - exact) / exact);
    }
    out.push_back(upper_check("recurrence_quadrature", qerr, c.tol("recurrence_quadrature")));
    if (N == 6)
        out.push_back(upper_check("log_divergence_slope", std::abs(chain.log_slope - 2.0), 1e-2,
                                  "truncated I(5, 6) grows like 2 ln(1/mu) at the cutoff r0^2/(4 mu^2)"));
    const double K = integrals::K_pow(N);
    out.push_back(upper_check("K_two_forms", std::abs(K - integrals::K_pow_alt(N)) / K, c.tol("constants")));

    // profiles
    const std::vector<double> radii = {0.0, 0.3, 1.0, 2.5, 7.0};
    double bub = 0.0, ker = 0.0;
    for (double r : radii) {
        const auto u = profiles::eval_U(r, dims);
        const double scale = std::pow(profiles::bubble_peak(N), dims.p);
        bub = std::max(bub, std::abs(u.laplacian + std::pow(u.value, dims.p)) / scale);
        std::vector<double> y(N, 0.0);
        for (int i = 0; i < N; ++i) y[i] = r * std::cos(0.7 * i + 0.3) / std::sqrt(0.5 * N);
        double s = 0.0;
        for (double v : y) s += v * v;
        for (int i = 0; i <= N; ++i) {
            const auto k = profiles::kernel_phi(i, y, dims);
            ker = std::max(ker, std::abs(k.laplacian + profiles::linearized_potential(s, N) * k.value) / (n * (n + 2)));
        }
    }
    out.push_back(upper_check("bubble_equation", bub, c.tol("pde_pointwise")));
    out.push_back(upper_check("kernel_equation", ker, c.tol("pde_pointwise")));

    if (have_geo) {
        double corr = 0.0, slope_dev = 0.0;
        std::vector<std::vector<double>> pts;
        for (int k = 0; k < 3; ++k) {
            std::vector<double> y(N, 0.0);
            for (int i = 0; i < N; ++i) y[i] = 0.4 * std::sin(1.3 * i + k + 0.5);
            pts.push_back(y);
        }
        for (const auto& y : pts) {
            corr = std::max(corr, std::abs(profiles::correction_residual(y, geo, dims, 1e-3, 1)));
            const std::vector<double> steps = {1e-2, 1e-3};
            std::vector<double> res;
            for (double h : steps) res.push_back(profiles::correction_residual(y, geo, dims, h, 0));
            if (res[0] != 0.0 && res[1] != 0.0)
                slope_dev = std::max(slope_dev, std::abs(fit::loglog_slope(steps, res).slope - 2.0));
        }
        out.push_back(upper_check("correction_equation", corr, c.tol("correction_residual")));
        out.push_back(upper_check("correction_fd_rate", slope_dev, c.tol("fd_slope"),
                                  "plain central differences converge at order 2"));
    }

    if (c.qmc_samples > 0) {
        // quasi-Monte Carlo mass of U^{2*} over B(4); the seed sets the lattice shift
        const double R = 4.0;
        const double exact = integrals::ball_integral(
            [&](double r) { return std::pow(profiles::eval_U(r, dims).value, dims.two_star); },
            Polynomial::constant(N, 1.0), R, N);
        // randomly shifted golden-ratio lattice in r, weighted by the sphere area r^{N-1}
        std::mt19937_64 rng(c.seed);
        const double shift = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        double sum = 0.0;
        for (int k = 0; k < c.qmc_samples; ++k) {
            const double r = R * std::fmod(shift + k * 0.6180339887498949, 1.0);
            sum += std::pow(r, N - 1) * std::pow(profiles::eval_U(r, dims).value, dims.two_star);
        }
        const double est = integrals::omega(N - 1) * R * sum / c.qmc_samples;
        out.push_back(upper_check("qmc_ball_mass", std::abs(est - exact) / exact, c.tol("qmc_rel")));
    }
    return out;
}

inline int cmd_verify(const Context& ctx) {
    const auto checks = verify_checks(ctx.cfg);
    json rep = ctx.header("verify");
    rep["checks"] = checks_json(checks);
    rep["passed"] = all_pass(checks);
    ctx.write("verify_report.json", io::dump(rep));
    return all_pass(checks) ? 0 : 1;
}

// ---------------------------------------------------------------------------
// expand

struct ExpandResult {
    std::vector<Check> checks;
    std::vector<std::string> notes;
    json coefficients = json::array();
    std::string csv;
};

inline double rel_err(double got, double want) {
    return want == 0.0 ? std::abs(got) : std::abs(got - want) / std::abs(want);
}

inline ExpandResult run_expand(const ExperimentConfig& c, int jobs) {
    ExpandResult res;
    const auto geo = local_geometry(c);
    const int N = c.N;
    const auto closed = energy::total_energy(geo);
    const energy::JModel model(geo);
    std::vector<energy::JSample> js(c.mu_grid.size());
    parallel_for(js.size(), jobs, [&](std::size_t i) { js[i] = model.sample(c.mu_grid[i]); });

    std::ostringstream csv;
    csv << "N,mu,eps,term,quadrature,closed_form,rel_err\n";
    auto row = [&](const std::string& mu, const std::string& eps, const std::string& term, double q, double cf) {
        csv << N << "," << mu << "," << eps << "," << term << "," << io::csv_double(q) << "," << io::csv_double(cf)
            << "," << io::csv_double(rel_err(q, cf)) << "\n";
    };
    energy::EnergyExpansion closed_excess = closed;
    closed_excess.c_const = 0.0;
    std::vector<fit::Sample> samples;
    for (std::size_t i = 0; i < js.size(); ++i)
        for (double eps : c.eps_grid) {
            samples.push_back({js[i].mu, eps, js[i].excess(eps)});
            row(io::csv_double(js[i].mu), io::csv_double(eps), "J_excess", js[i].excess(eps),
                closed_excess.evaluate(js[i].mu, eps));
        }

    const double KN = integrals::K_pow(N) / N;
    struct Coef {
        std::string name;
        double closed;
        double fitted;
        double tol;
        double scale; // below 1e-12 of this the closed form counts as vanishing
    };
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double curv_scale = integrals::K_pow(N) * (geo.W_norm_sq + geo.E_norm_sq + geo.S * geo.S + std::abs(geo.lap_S));
    std::vector<Coef> coefs;
    coefs.push_back({"c_const", KN, nan, c.tol("const_rel"), KN});
    if (N == 6)
        coefs.push_back({"c_mu4log", closed.c_mu4log, nan, c.tol("coeff_rel_log"), curv_scale});
    else
        coefs.push_back({"c_mu4", closed.c_mu4, nan, c.tol("coeff_rel"), curv_scale});
    coefs.push_back({"c_eps_mu2", closed.c_eps_mu2, nan, c.tol("coeff_rel"), integrals::K_pow(N) * std::abs(geo.h)});

    std::optional<std::string> fit_failure;
    try {
        const auto f = fit::fit_expansion(samples, fit::Basis::for_dimension(N));
        coefs[0].fitted = KN + f.coeffs.c_const;
        coefs[1].fitted = N == 6 ? f.coeffs.c_mu4log : f.coeffs.c_mu4;
        coefs[2].fitted = f.coeffs.c_eps_mu2;
        res.notes.push_back("fit condition number " + io::csv_double(f.condition_number) + ", max relative residual " +
                            io::csv_double(f.max_rel_residual));
    } catch (const RankDeficiencyError& e) {
        fit_failure = std::string("rank deficiency: ") + e.what();
    } catch (const std::invalid_argument& e) {
        fit_failure = std::string("fit not possible: ") + e.what();
    }
    if (fit_failure) res.notes.push_back(*fit_failure);
    for (const auto& k : coefs) {
        Check ch;
        ch.name = k.name;
        ch.threshold = k.tol;
        if (fit_failure) {
            ch.measured = std::numeric_limits<double>::quiet_NaN();
            ch.pass = false;
            ch.note = *fit_failure;
        } else {
            ch.measured = rel_err(k.fitted, k.closed);
            ch.pass = ch.measured <= k.tol;
            if (!(std::abs(k.closed) > 1e-12 * k.scale)) {
                ch.enabled = false;
                ch.note = "closed form vanishes for this geometry; the fitted value is reported only";
            }
        }
        res.checks.push_back(ch);
        res.coefficients.push_back({{"term", k.name},
                                    {"closed_form", io::number(k.closed)},
                                    {"fitted", io::number(k.fitted)},
                                    {"rel_err", io::number(ch.measured)},
                                    {"status", fit_failure ? "rank_deficient" : (ch.pass ? "pass" : "fail")}});
        row("", "", k.name, k.fitted, k.closed);
    }

    // correction energy against its closed form at the smallest sampled mu
    const double mu_c = *std::min_element(c.mu_grid.begin(), c.mu_grid.end());
    if (mu_c < c.r0 / 4) {
        const auto ce = energy::correction_energy(geo, mu_c);
        Check ch;
        ch.threshold = c.tol("correction_rel");
        if (N == 6) {
            // the O(1) remainder is unknown; the increment over two decades isolates the log coefficient
            const auto ce2 = energy::correction_energy(geo, mu_c * 1e-2);
            const double slope = (ce2.quadrature - ce.quadrature) / std::log(1e-2);
            ch.name = "correction_log_coefficient";
            ch.measured = rel_err(slope, ce.closed_log);
            row(io::csv_double(mu_c), "", "correction_log", slope, ce.closed_log);
            if (ce.closed_log == 0.0) ch.enabled = false;
        } else {
            ch.name = "correction_constant";
            ch.measured = rel_err(ce.quadrature, ce.closed_const);
            row(io::csv_double(mu_c), "", "correction", ce.quadrature, ce.closed_const);
            if (ce.closed_const == 0.0) ch.enabled = false;
        }
        ch.pass = ch.measured <= ch.threshold;
        if (!ch.enabled) ch.note = "closed form vanishes for this geometry";
        res.checks.push_back(ch);
    }
    res.csv = csv.str();
    return res;
}

inline int cmd_expand(const Context& ctx) {
    const auto r = run_expand(ctx.cfg, ctx.jobs);
    ctx.write("expansion.csv", r.csv);
    json rep = ctx.header("expand");
    rep["coefficients"] = r.coefficients;
    rep["checks"] = checks_json(r.checks);
    rep["notes"] = r.notes;
    rep["passed"] = all_pass(r.checks);
    ctx.write("expand_summary.json", io::dump(rep));
    return all_pass(r.checks) ? 0 : 1;
}

// ---------------------------------------------------------------------------
// rates

struct RatesResult {
    std::vector<Check> checks;
    json branches = json::array();
    std::vector<std::string> notes;
    std::string csv;
};

inline RatesResult run_rates(const ExperimentConfig& c, int jobs) {
    RatesResult res;
    const auto dims_list = c.dimensions.empty() ? std::vector<int>{c.N} : c.dimensions;
    struct Item {
        std::size_t model;
        double mu, eps;
        residual::ResidualSample out;
    };
    std::vector<residual::ResidualModel> models;
    for (int N : dims_list) {
        const auto dims = DimensionParams::make(N, c.r0);
        const auto chart = residual::ChartModel::make(tensor_for(c, N), dims, grad_S_for(c, N), c.lap_S, c.h);
        residual::ResidualOptions ro;
        ro.directions = c.directions;
        ro.seed = c.seed;
        models.emplace_back(chart, ro);
    }
    std::vector<Item> items;
    for (std::size_t m = 0; m < models.size(); ++m)
        for (double eps : c.eps_grid)
            for (double mu : c.mu_grid) items.push_back({m, mu, eps, {}});
    parallel_for(items.size(), jobs, [&](std::size_t i) { items[i].out = models[items[i].model].sample(items[i].mu, items[i].eps); });

    std::ostringstream csv;
    csv << "N,eps,mu,value,eps_part,predicted_exponent\n";
    for (const auto& it : items) {
        const int N = dims_list[it.model];
        csv << N << "," << io::csv_double(it.eps) << "," << io::csv_double(it.mu) << "," << io::csv_double(it.out.value)
            << "," << io::csv_double(it.out.eps_part) << "," << io::csv_double(residual::predicted_exponent(N)) << "\n";
    }
    res.csv = csv.str();

    const double tol = c.tol("slope_abs");
    for (std::size_t m = 0; m < models.size(); ++m) {
        const int N = dims_list[m];
        for (double eps : c.eps_grid) {
            std::vector<double> mus, vals;
            for (const auto& it : items)
                if (it.model == m && it.eps == eps) {
                    mus.push_back(it.mu);
                    vals.push_back(eps == 0.0 ? it.out.value : it.out.eps_part);
                }
            const double predicted = eps == 0.0 ? residual::predicted_exponent(N) : residual::predicted_eps_exponent;
            const std::string label =
                "N" + std::to_string(N) + (eps == 0.0 ? "_slope" : "_eps_slope_" + io::csv_double(eps));
            json b = {{"N", N}, {"eps", eps}, {"quantity", eps == 0.0 ? "residual" : "eps_part"},
                      {"predicted", predicted}};
            Check ch;
            ch.name = label;
            ch.threshold = tol;
            try {
                const double s = fit::loglog_slope(mus, vals).slope;
                b["fitted"] = s;
                ch.measured = std::abs(s - predicted);
                ch.pass = ch.measured <= tol;
                if (N == 6 || N == 8) ch.note = "log-factor refinement not resolved; polynomial exponent only";
            } catch (const std::exception& e) {
                b["fitted"] = "nan";
                ch.measured = std::numeric_limits<double>::quiet_NaN();
                ch.pass = false;
                ch.note = std::string("slope not determined: ") + e.what();
                res.notes.push_back(label + ": " + ch.note);
            }
            res.branches.push_back(b);
            res.checks.push_back(ch);
        }
    }
    return res;
}

inline int cmd_rates(const Context& ctx) {
    const auto r = run_rates(ctx.cfg, ctx.jobs);
    ctx.write("rates.csv", r.csv);
    json rep = ctx.header("rates");
    rep["branches"] = r.branches;
    rep["checks"] = checks_json(r.checks);
    rep["notes"] = r.notes;
    rep["passed"] = all_pass(r.checks);
    ctx.write("rates_summary.json", io::dump(rep));
    return all_pass(r.checks) ? 0 : 1;
}

// ---------------------------------------------------------------------------
// blowup

// Parameter square [-extent, extent]^2 -> S^{n1}(1 + a x) x S^{n2}(1 + a y) with a
// Gaussian bump h centered at `center`, shifted down by `offset`.
inline reduction::ReducedEnergyField synthetic_field(const SyntheticField& s) {
    reduction::ReducedEnergyField f;
    const auto dims = DimensionParams::make(s.n1 + s.n2);
    for (int i = 0; i < s.grid; ++i)
        for (int j = 0; j < s.grid; ++j) {
            const double x = -s.extent + 2.0 * s.extent * i / (s.grid - 1);
            const double y = -s.extent + 2.0 * s.extent * j / (s.grid - 1);
            const auto R = curvature::product_spheres(s.n1, 1.0 + s.radius_slope * x, s.n2, 1.0 + s.radius_slope * y);
            const double W2 = curvature::decompose(R, dims).W_norm_sq;
            const double dx = x - s.center[0], dy = y - s.center[1];
            f.coords.push_back({x, y});
            f.h_vals.push_back(s.amplitude * std::exp(-(dx * dx + dy * dy) / (s.width * s.width)) - s.offset);
            f.W2_vals.push_back(std::max(0.0, W2));
        }
    return f;
}

inline reduction::ReducedEnergyField field_for(const ExperimentConfig& c) {
    if (!c.field) throw ConfigError("blowup needs a \"field\" entry (path, points or synthetic) or h = {\"field\": path}");
    const auto& f = *c.field;
    if (f.synthetic) {
        if (f.synthetic->n1 + f.synthetic->n2 != c.N)
            throw ConfigError("synthetic field dimension n1 + n2 must equal N = " + std::to_string(c.N));
        return synthetic_field(*f.synthetic);
    }
    if (f.inline_doc) return io::field_from_json(*f.inline_doc);
    return io::read_field(f.path);
}

struct BlowupResult {
    reduction::BlowupReport report;
    reduction::ReducedEnergyField field;
    json doc;
    std::string landscape;
};

inline BlowupResult run_blowup(const ExperimentConfig& c, int jobs) {
    BlowupResult r;
    r.field = field_for(c);
    std::vector<double> eps;
    for (double e : c.eps_grid)
        if (e > 0.0) eps.push_back(e);
    if (eps.empty()) throw ConfigError("blowup needs at least one positive value in eps_grid");
    reduction::RefineOptions ro;
    ro.tie_rel = c.tol("tie_rel");
    r.report = reduction::blowup_report(r.field, eps, c.N, ro);
    const auto& rep = r.report;

    auto coords_of = [&](std::size_t i) {
        return r.field.coords.empty() ? std::vector<double>{} : r.field.coords[i];
    };
    json crit = json::array();
    for (const auto& p : rep.critical.points)
        crit.push_back({{"xi_index", p.xi_index},
                        {"coords", coords_of(p.xi_index)},
                        {"refined_coords", p.refined_coords},
                        {"kind", reduction::kind_name(p.kind)},
                        {"E", p.E},
                        {"d_star", io::number(p.d)},
                        {"tildeE", p.tildeE},
                        {"in_max_band", p.in_max_band},
                        {"stability_certified", p.stability_certified}});
    json inf = json::array();
    for (std::size_t i : rep.critical.infinite_points)
        inf.push_back({{"xi_index", i}, {"coords", coords_of(i)}, {"d_star", "inf"},
                       {"note", "W2 = 0 with h > 0: excluded from finite-mu predictions"}});
    json recs = json::array();
    for (const auto& e : rep.records) {
        json pts = json::array();
        for (const auto& p : e.points)
            pts.push_back({{"xi_index", p.xi_index}, {"coords", p.coords}, {"d_star", p.d}, {"mu", p.mu},
                           {"peak", p.peak}, {"tildeE", p.tildeE}});
        recs.push_back({{"eps", e.eps}, {"points", pts}});
    }
    r.doc = {{"constants", {{"c2", rep.consts.c2}, {"c3", rep.consts.c3}, {"gamma", rep.consts.gamma}}},
             {"E_max", rep.critical.E_max},
             {"critical_points", crit},
             {"infinite_points", inf},
             {"records", recs}};

    // landscape
    const std::size_t n = r.field.size();
    std::vector<std::string> rows(n);
    parallel_for(n, jobs, [&](std::size_t i) {
        const auto pd = r.field.at(i);
        const double E = reduction::E_ratio(pd.h, pd.W2);
        double d = std::numeric_limits<double>::quiet_NaN(), te = std::numeric_limits<double>::quiet_NaN();
        if (pd.h > 0.0) {
            d = reduction::d_star(pd, rep.consts);
            if (std::isfinite(d)) te = reduction::tilde_E(d, pd, rep.consts);
        }
        std::ostringstream os;
        os << i;
        for (double x : coords_of(i)) os << "," << io::csv_double(x);
        os << "," << io::csv_double(pd.h) << "," << io::csv_double(pd.W2) << "," << io::csv_double(E) << ","
           << io::csv_double(d) << "," << io::csv_double(te) << "\n";
        rows[i] = os.str();
    });
    std::ostringstream csv;
    csv << "index";
    const std::size_t dim = r.field.coords.empty() ? 0 : r.field.coords[0].size();
    for (std::size_t a = 0; a < dim; ++a) csv << ",x" << a;
    csv << ",h,W2,E,d_star,tildeE\n";
    for (const auto& s : rows) csv << s;
    r.landscape = csv.str();
    return r;
}

inline int cmd_blowup(const Context& ctx) {
    BlowupResult r;
    try {
        r = run_blowup(ctx.cfg, ctx.jobs);
    } catch (const NoCompetingPointsError& e) {
        throw NoCompetingPointsError(std::string(e.what()) +
                                     "; the field needs a point with h > 0 and |W|^2 > 0 for a finite blow-up scale");
    }
    json rep = ctx.header("blowup");
    for (auto it = r.doc.begin(); it != r.doc.end(); ++it) rep[it.key()] = it.value();
    rep["passed"] = true;
    ctx.write("blowup_report.json", io::dump(rep));
    ctx.write("landscape.csv", r.landscape);
    return 0;
}

// ---------------------------------------------------------------------------

inline int run(const std::string& command, const RunOptions& opt, std::ostream& err = std::cerr) {
    try {
        const auto ctx = make_context(opt);
        if (command == "verify") return cmd_verify(ctx);
        if (command == "expand") return cmd_expand(ctx);
        if (command == "rates") return cmd_rates(ctx);
        if (command == "blowup") return cmd_blowup(ctx);
        err << "error: unknown command '" << command << "'\n";
        return 2;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "file error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace yamabe::lab
