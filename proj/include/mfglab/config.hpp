#pragma once

// Run configuration: JSON text <-> typed RunConfig, validation naming the offending key,
// and construction of the solver objects.

#include "mfglab/mfglab.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace mfglab {

using Json = nlohmann::ordered_json;

struct GridConfig {
    double x_min = -3.0;
    double x_max = 3.0;
    std::size_t n_cells = 400;
    std::string boundary = "no_flux";
    bool operator==(const GridConfig&) const = default;
};

struct TimeConfig {
    double T = 1.0;
    std::size_t n_steps = 200;
    bool operator==(const TimeConfig&) const = default;
};

/// a(t,x) = a0 + a1 sin^2(x).
struct DiffusionConfig {
    double a0 = 0.1;
    double a1 = 0.0;
    double gamma = 0.1;
    bool operator==(const DiffusionConfig&) const = default;
};

/// f0(t,x) = f0 + f1 cos(x).
struct DriftConfig {
    double f0 = 1.0;
    double f1 = 0.0;
    bool operator==(const DriftConfig&) const = default;
};

struct LagrangianConfig {
    std::string kind = "quadratic";
    double weight = 1.0;
    double radius = 1.0;
    std::size_t K = 512;
    bool operator==(const LagrangianConfig&) const = default;
};

/// kind: zero | linear (alpha, C1) | quadratic (kappa) | threshold (kappa, rbar).
struct CostConfig {
    std::string kind = "quadratic";
    double kappa = 1.0;
    double alpha = 0.0;
    double C1 = 1.0;
    double rbar = 0.0;
    bool operator==(const CostConfig&) const = default;
};

/// kind: gaussian (mean, var) | uniform | two_gaussians (means, vars, weights).
struct Rho0Config {
    std::string kind = "gaussian";
    double mean = 0.0;
    double var = 0.04;
    std::vector<double> means;
    std::vector<double> vars;
    std::vector<double> weights;
    bool operator==(const Rho0Config&) const = default;
};

struct IterationSection {
    double omega = 0.5;
    double tol = 1e-6;
    std::size_t max_iter = 200;
    std::string init = "rho0_frozen";
    bool operator==(const IterationSection&) const = default;
};

struct ParticlesConfig {
    bool enabled = false;
    std::size_t n_paths = 100000;
    std::uint64_t seed = 42;
    std::size_t histogram_cells = 100;
    bool operator==(const ParticlesConfig&) const = default;
};

/// Constant-drift kernel-vs-grid comparison.
struct OracleConfig {
    double drift = 0.5;
    double lambda = 50.0;
    double m = 2.0;
    double tol = 1e-8;
    std::size_t max_iter = 100;
    bool operator==(const OracleConfig&) const = default;
};

struct DiagnosticsConfig {
    std::size_t spike_nodes = 100;
    std::uint64_t spike_seed = 7;
    bool operator==(const DiagnosticsConfig&) const = default;
};

struct RunConfig {
    std::string scenario = "quadratic";
    GridConfig grid;
    TimeConfig time;
    DiffusionConfig diffusion;
    DriftConfig drift;
    LagrangianConfig lagrangian;
    CostConfig running_cost;
    CostConfig terminal_cost;
    Rho0Config rho0;
    IterationSection iteration;
    ParticlesConfig particles;
    OracleConfig oracle;
    DiagnosticsConfig diagnostics;
    bool operator==(const RunConfig&) const = default;
};

/// Defaults of a named scenario; explicit keys in the config text override them.
inline RunConfig scenario_defaults(const std::string& name)
{
    RunConfig c;
    c.scenario = name;
    if (name == "quadratic" || name == "custom") {
        return c;
    }
    if (name == "decoupled") {
        c.running_cost = {"linear", 1.0, 0.5, 1.0, 0.0};
        c.terminal_cost = {"linear", 1.0, 2.0, 1.0, 0.0};
        c.iteration.omega = 1.0;
        c.iteration.tol = 1e-10;
        return c;
    }
    if (name == "congestion") {
        c.grid.x_min = -4.0;
        c.grid.x_max = 4.0;
        c.running_cost = {"threshold", 5.0, 0.0, 1.0, 0.8};
        c.terminal_cost = {"quadratic", 1.0, 0.0, 1.0, 0.0};
        c.rho0.kind = "two_gaussians";
        c.rho0.means = {-1.0, 1.0};
        c.rho0.vars = {0.04, 0.04};
        c.rho0.weights = {0.5, 0.5};
        return c;
    }
    throw ConfigError("scenario: unknown scenario '" + name + "' (expected decoupled, quadratic, congestion, custom)");
}

namespace detail {

inline void reject_unknown(const Json& obj, const std::string& where, const std::set<std::string>& allowed)
{
    if (!obj.is_object()) {
        throw ConfigError(where + ": expected an object");
    }
    for (const auto& [k, v] : obj.items()) {
        if (!allowed.count(k)) {
            throw ConfigError((where.empty() ? k : where + "." + k) + ": unknown key");
        }
    }
}

inline void read(const Json& obj, const std::string& where, const char* key, double& out)
{
    if (!obj.contains(key)) {
        return;
    }
    const Json& v = obj.at(key);
    if (!v.is_number()) {
        throw ConfigError(where + "." + key + ": expected a number");
    }
    out = v.get<double>();
    if (!std::isfinite(out)) {
        throw ConfigError(where + "." + key + ": must be finite");
    }
}

inline void read(const Json& obj, const std::string& where, const char* key, std::size_t& out)
{
    if (!obj.contains(key)) {
        return;
    }
    const Json& v = obj.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
        throw ConfigError(where + "." + key + ": expected a nonnegative integer");
    }
    out = v.get<std::size_t>();
}

inline void read(const Json& obj, const std::string& where, const char* key, std::uint64_t& out, int)
{
    std::size_t tmp = out;
    read(obj, where, key, tmp);
    out = tmp;
}

inline void read(const Json& obj, const std::string& where, const char* key, std::string& out)
{
    if (!obj.contains(key)) {
        return;
    }
    if (!obj.at(key).is_string()) {
        throw ConfigError(where + "." + key + ": expected a string");
    }
    out = obj.at(key).get<std::string>();
}

inline void read(const Json& obj, const std::string& where, const char* key, bool& out)
{
    if (!obj.contains(key)) {
        return;
    }
    if (!obj.at(key).is_boolean()) {
        throw ConfigError(where + "." + key + ": expected true or false");
    }
    out = obj.at(key).get<bool>();
}

inline void read(const Json& obj, const std::string& where, const char* key, std::vector<double>& out)
{
    if (!obj.contains(key)) {
        return;
    }
    const Json& v = obj.at(key);
    if (!v.is_array()) {
        throw ConfigError(where + "." + key + ": expected an array of numbers");
    }
    out.clear();
    for (const auto& e : v) {
        if (!e.is_number()) {
            throw ConfigError(where + "." + key + ": expected an array of numbers");
        }
        out.push_back(e.get<double>());
    }
}

inline void read_cost(const Json& root, const char* key, CostConfig& c)
{
    if (!root.contains(key)) {
        return;
    }
    const Json& o = root.at(key);
    reject_unknown(o, key, {"kind", "kappa", "alpha", "C1", "rbar"});
    read(o, key, "kind", c.kind);
    read(o, key, "kappa", c.kappa);
    read(o, key, "alpha", c.alpha);
    read(o, key, "C1", c.C1);
    read(o, key, "rbar", c.rbar);
}

inline Json cost_json(const CostConfig& c)
{
    return Json{{"kind", c.kind}, {"kappa", c.kappa}, {"alpha", c.alpha}, {"C1", c.C1}, {"rbar", c.rbar}};
}

inline void fail(const std::string& key, const std::string& why) { throw ConfigError(key + ": " + why); }

inline void validate_cost(const CostConfig& c, const std::string& key)
{
    if (c.kind != "zero" && c.kind != "linear" && c.kind != "quadratic" && c.kind != "threshold") {
        fail(key + ".kind", "unknown cost kind '" + c.kind + "' (expected zero, linear, quadratic, threshold)");
    }
    if (c.kappa < 0.0) {
        fail(key + ".kappa", "must be >= 0 (convexity)");
    }
    if (!(c.C1 > 0.0)) {
        fail(key + ".C1", "must be > 0 (quadratic growth bound)");
    }
    if (c.rbar < 0.0) {
        fail(key + ".rbar", "must be >= 0");
    }
}

} // namespace detail

/// Checks every module precondition that can be decided from the configuration alone.
inline void validate_config(const RunConfig& c)
{
    using detail::fail;
    scenario_defaults(c.scenario);
    if (!(c.grid.x_min < c.grid.x_max)) {
        fail("grid.x_max", "must be > grid.x_min");
    }
    if (c.grid.n_cells < 4) {
        fail("grid.n_cells", "must be >= 4 (grid too small)");
    }
    if (c.grid.boundary != "no_flux" && c.grid.boundary != "periodic") {
        fail("grid.boundary", "expected no_flux or periodic");
    }
    if (!(c.time.T > 0.0)) {
        fail("time.T", "must be > 0");
    }
    if (c.time.n_steps < 1) {
        fail("time.n_steps", "must be >= 1");
    }
    if (!(c.diffusion.gamma > 0.0)) {
        fail("diffusion.gamma", "must be > 0 (uniform ellipticity, H2)");
    }
    if (c.diffusion.a0 + std::min(c.diffusion.a1, 0.0) < c.diffusion.gamma) {
        fail("diffusion.a0", "a0 + min(a1, 0) must be >= gamma (uniform ellipticity, H2)");
    }
    if (c.lagrangian.kind != "quadratic" && c.lagrangian.kind != "zero" && c.lagrangian.kind != "absolute") {
        fail("lagrangian.kind", "unknown Lagrangian '" + c.lagrangian.kind + "' (expected quadratic, zero, absolute)");
    }
    if (!(c.lagrangian.radius > 0.0)) {
        fail("lagrangian.radius", "must be > 0 (control ball)");
    }
    if (c.lagrangian.K < 1) {
        fail("lagrangian.K", "must be >= 1");
    }
    if (c.lagrangian.weight < 0.0) {
        fail("lagrangian.weight", "must be >= 0 (convexity)");
    }
    detail::validate_cost(c.running_cost, "running_cost");
    detail::validate_cost(c.terminal_cost, "terminal_cost");

    const Rho0Config& r = c.rho0;
    const bool periodic = c.grid.boundary == "periodic";
    auto check_gaussian = [&](double mean, double var, const std::string& key) {
        if (!(var > 0.0)) {
            fail(key + ".var", "must be > 0");
        }
        if (!periodic && (mean - 6.0 * std::sqrt(var) < c.grid.x_min || mean + 6.0 * std::sqrt(var) > c.grid.x_max)) {
            fail(key, "mean +- 6 standard deviations must lie inside the domain");
        }
    };
    if (r.kind == "gaussian") {
        check_gaussian(r.mean, r.var, "rho0");
    } else if (r.kind == "two_gaussians") {
        if (r.means.empty() || r.means.size() != r.vars.size() || r.means.size() != r.weights.size()) {
            fail("rho0.means", "means, vars and weights must be nonempty and of equal length");
        }
        double wsum = 0.0;
        for (std::size_t k = 0; k < r.means.size(); ++k) {
            check_gaussian(r.means[k], r.vars[k], "rho0");
            if (r.weights[k] < 0.0) {
                fail("rho0.weights", "must be >= 0");
            }
            wsum += r.weights[k];
        }
        if (!(wsum > 0.0)) {
            fail("rho0.weights", "must have positive sum");
        }
    } else if (r.kind != "uniform") {
        fail("rho0.kind", "unknown density '" + r.kind + "' (expected gaussian, uniform, two_gaussians)");
    }

    if (!(c.iteration.omega > 0.0 && c.iteration.omega <= 1.0)) {
        fail("iteration.omega", "must lie in (0, 1]");
    }
    if (!(c.iteration.tol > 0.0)) {
        fail("iteration.tol", "must be > 0");
    }
    if (c.iteration.max_iter < 1) {
        fail("iteration.max_iter", "must be >= 1");
    }
    if (c.iteration.init != "uniform_density" && c.iteration.init != "rho0_frozen") {
        fail("iteration.init", "expected uniform_density or rho0_frozen (custom initial trajectories are "
                               "library-only)");
    }
    if (c.particles.n_paths < 1) {
        fail("particles.n_paths", "must be >= 1");
    }
    if (c.particles.enabled &&
        (c.particles.histogram_cells < 4 || c.grid.n_cells % c.particles.histogram_cells != 0)) {
        fail("particles.histogram_cells", "must be >= 4 and divide grid.n_cells");
    }
    if (!(c.oracle.lambda > 0.0)) {
        fail("oracle.lambda", "must be > 0");
    }
    if (!(c.oracle.m >= 1.0)) {
        fail("oracle.m", "must be >= 1");
    }
    if (!(c.oracle.tol > 0.0)) {
        fail("oracle.tol", "must be > 0");
    }
    if (c.oracle.max_iter < 1) {
        fail("oracle.max_iter", "must be >= 1");
    }
}

inline RunConfig config_from_json(const Json& root)
{
    using detail::read;
    detail::reject_unknown(root, "",
                           {"scenario", "grid", "time", "diffusion", "drift", "lagrangian", "running_cost",
                            "terminal_cost", "rho0", "iteration", "particles", "oracle", "diagnostics"});
    std::string scenario = "quadratic";
    read(root, "", "scenario", scenario);
    RunConfig c = scenario_defaults(scenario);
    auto section = [&](const char* name, const std::set<std::string>& keys) -> const Json* {
        if (!root.contains(name)) {
            return nullptr;
        }
        detail::reject_unknown(root.at(name), name, keys);
        return &root.at(name);
    };
    if (const Json* o = section("grid", {"x_min", "x_max", "n_cells", "boundary"})) {
        read(*o, "grid", "x_min", c.grid.x_min);
        read(*o, "grid", "x_max", c.grid.x_max);
        read(*o, "grid", "n_cells", c.grid.n_cells);
        read(*o, "grid", "boundary", c.grid.boundary);
    }
    if (const Json* o = section("time", {"T", "n_steps"})) {
        read(*o, "time", "T", c.time.T);
        read(*o, "time", "n_steps", c.time.n_steps);
    }
    if (const Json* o = section("diffusion", {"a0", "a1", "gamma"})) {
        read(*o, "diffusion", "a0", c.diffusion.a0);
        read(*o, "diffusion", "a1", c.diffusion.a1);
        read(*o, "diffusion", "gamma", c.diffusion.gamma);
    }
    if (const Json* o = section("drift", {"f0", "f1"})) {
        read(*o, "drift", "f0", c.drift.f0);
        read(*o, "drift", "f1", c.drift.f1);
    }
    if (const Json* o = section("lagrangian", {"kind", "weight", "radius", "K"})) {
        read(*o, "lagrangian", "kind", c.lagrangian.kind);
        read(*o, "lagrangian", "weight", c.lagrangian.weight);
        read(*o, "lagrangian", "radius", c.lagrangian.radius);
        read(*o, "lagrangian", "K", c.lagrangian.K);
    }
    detail::read_cost(root, "running_cost", c.running_cost);
    detail::read_cost(root, "terminal_cost", c.terminal_cost);
    if (const Json* o = section("rho0", {"kind", "mean", "var", "means", "vars", "weights"})) {
        read(*o, "rho0", "kind", c.rho0.kind);
        read(*o, "rho0", "mean", c.rho0.mean);
        read(*o, "rho0", "var", c.rho0.var);
        read(*o, "rho0", "means", c.rho0.means);
        read(*o, "rho0", "vars", c.rho0.vars);
        read(*o, "rho0", "weights", c.rho0.weights);
    }
    if (const Json* o = section("iteration", {"omega", "tol", "max_iter", "init"})) {
        read(*o, "iteration", "omega", c.iteration.omega);
        read(*o, "iteration", "tol", c.iteration.tol);
        read(*o, "iteration", "max_iter", c.iteration.max_iter);
        read(*o, "iteration", "init", c.iteration.init);
    }
    if (const Json* o = section("particles", {"enabled", "n_paths", "seed", "histogram_cells"})) {
        read(*o, "particles", "enabled", c.particles.enabled);
        read(*o, "particles", "n_paths", c.particles.n_paths);
        read(*o, "particles", "seed", c.particles.seed, 0);
        read(*o, "particles", "histogram_cells", c.particles.histogram_cells);
    }
    if (const Json* o = section("oracle", {"drift", "lambda", "m", "tol", "max_iter"})) {
        read(*o, "oracle", "drift", c.oracle.drift);
        read(*o, "oracle", "lambda", c.oracle.lambda);
        read(*o, "oracle", "m", c.oracle.m);
        read(*o, "oracle", "tol", c.oracle.tol);
        read(*o, "oracle", "max_iter", c.oracle.max_iter);
    }
    if (const Json* o = section("diagnostics", {"spike_nodes", "spike_seed"})) {
        read(*o, "diagnostics", "spike_nodes", c.diagnostics.spike_nodes);
        read(*o, "diagnostics", "spike_seed", c.diagnostics.spike_seed, 0);
    }
    validate_config(c);
    return c;
}

/// Parses and validates config text. Syntax errors carry the parser's line and column.
inline RunConfig parse_config(const std::string& text)
{
    Json root;
    try {
        root = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return config_from_json(root);
}

inline RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

/// Complete config with every default spelled out.
inline Json config_to_json(const RunConfig& c)
{
    return Json{
        {"scenario", c.scenario},
        {"grid", {{"x_min", c.grid.x_min}, {"x_max", c.grid.x_max}, {"n_cells", c.grid.n_cells},
                  {"boundary", c.grid.boundary}}},
        {"time", {{"T", c.time.T}, {"n_steps", c.time.n_steps}}},
        {"diffusion", {{"a0", c.diffusion.a0}, {"a1", c.diffusion.a1}, {"gamma", c.diffusion.gamma}}},
        {"drift", {{"f0", c.drift.f0}, {"f1", c.drift.f1}}},
        {"lagrangian", {{"kind", c.lagrangian.kind}, {"weight", c.lagrangian.weight},
                        {"radius", c.lagrangian.radius}, {"K", c.lagrangian.K}}},
        {"running_cost", detail::cost_json(c.running_cost)},
        {"terminal_cost", detail::cost_json(c.terminal_cost)},
        {"rho0", {{"kind", c.rho0.kind}, {"mean", c.rho0.mean}, {"var", c.rho0.var}, {"means", c.rho0.means},
                  {"vars", c.rho0.vars}, {"weights", c.rho0.weights}}},
        {"iteration", {{"omega", c.iteration.omega}, {"tol", c.iteration.tol},
                       {"max_iter", c.iteration.max_iter}, {"init", c.iteration.init}}},
        {"particles", {{"enabled", c.particles.enabled}, {"n_paths", c.particles.n_paths},
                       {"seed", c.particles.seed}, {"histogram_cells", c.particles.histogram_cells}}},
        {"oracle", {{"drift", c.oracle.drift}, {"lambda", c.oracle.lambda}, {"m", c.oracle.m},
                    {"tol", c.oracle.tol}, {"max_iter", c.oracle.max_iter}}},
        {"diagnostics", {{"spike_nodes", c.diagnostics.spike_nodes}, {"spike_seed", c.diagnostics.spike_seed}}},
    };
}

inline std::string render_config(const RunConfig& c) { return config_to_json(c).dump(2) + "\n"; }

inline Grid make_grid(const RunConfig& c)
{
    return Grid(c.grid.x_min, c.grid.x_max, c.grid.n_cells,
                c.grid.boundary == "periodic" ? Boundary::periodic : Boundary::no_flux);
}

inline TimeGrid make_timegrid(const RunConfig& c) { return TimeGrid(c.time.T, c.time.n_steps); }

inline CoefficientField make_coefficients(const RunConfig& c)
{
    const double a0 = c.diffusion.a0, a1 = c.diffusion.a1, f0 = c.drift.f0, f1 = c.drift.f1;
    CoefficientField coef = CoefficientField::constant(a0, f0, c.diffusion.gamma);
    if (a1 != 0.0) {
        coef.a_coef = [a0, a1](double, double x) { return a0 + a1 * std::sin(x) * std::sin(x); };
        coef.constant_a.reset();
    }
    if (f1 != 0.0) {
        coef.f0 = [f0, f1](double, double x) { return f0 + f1 * std::cos(x); };
    }
    return coef;
}

inline LagrangianSpec make_lagrangian(const RunConfig& c)
{
    const auto& l = c.lagrangian;
    if (l.kind == "zero") {
        return LagrangianSpec::zero(l.K);
    }
    if (l.kind == "absolute") {
        return LagrangianSpec::absolute(l.weight, l.K);
    }
    return LagrangianSpec::quadratic(l.weight, l.K);
}

inline ConvexCostSpec make_cost(const CostConfig& c)
{
    if (c.kind == "zero") {
        return ConvexCostSpec::zero();
    }
    if (c.kind == "linear") {
        return ConvexCostSpec::linear(c.alpha, c.C1);
    }
    if (c.kind == "threshold") {
        return ConvexCostSpec::threshold(c.kappa, c.rbar);
    }
    return ConvexCostSpec::quadratic(c.kappa);
}

/// Piecewise samples at cell centers, renormalized to unit discrete mass. Gaussians are
/// image-summed on periodic grids.
inline Field make_rho0(const RunConfig& c, const Grid& g)
{
    auto gauss = [&](double x, double mean, double var) {
        double s = 0.0;
        const int images = g.periodic() ? 8 : 0;
        for (int k = -images; k <= images; ++k) {
            const double z = x - mean - k * g.length();
            s += std::exp(-z * z / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
        }
        return s;
    };
    Field f;
    if (c.rho0.kind == "uniform") {
        f.assign(g.size(), 1.0);
    } else if (c.rho0.kind == "gaussian") {
        f = sample(g, [&](double x) { return gauss(x, c.rho0.mean, c.rho0.var); });
    } else {
        f = sample(g, [&](double x) {
            double s = 0.0;
            for (std::size_t k = 0; k < c.rho0.means.size(); ++k) {
                s += c.rho0.weights[k] * gauss(x, c.rho0.means[k], c.rho0.vars[k]);
            }
            return s;
        });
    }
    const double m = integrate(f, g);
    if (!(m > 0.0)) {
        throw ConfigError("rho0: density has zero mass on the grid");
    }
    for (double& v : f) {
        v /= m;
    }
    return f;
}

inline MFGProblem make_problem(const RunConfig& c)
{
    const Grid g = make_grid(c);
    return MFGProblem{g,
                      make_timegrid(c),
                      make_coefficients(c),
                      make_lagrangian(c),
                      ControlBall(c.lagrangian.radius),
                      make_cost(c.running_cost),
                      TerminalCostSpec::from(make_cost(c.terminal_cost)),
                      make_rho0(c, g)};
}

inline IterationConfig make_iteration(const RunConfig& c)
{
    IterationConfig it;
    it.damping_omega = c.iteration.omega;
    it.tol = c.iteration.tol;
    it.max_iter = c.iteration.max_iter;
    it.init = c.iteration.init == "uniform_density" ? InitKind::uniform_density : InitKind::rho0_frozen;
    return it;
}

inline SDEConfig make_sde(const RunConfig& c, const Grid& g, const TimeGrid& tg)
{
    SDEConfig s;
    s.n_paths = c.particles.n_paths;
    s.seed = c.particles.seed;
    s.dt = tg.dt();
    s.boundary = matching_boundary(g);
    return s;
}

} // namespace mfglab
