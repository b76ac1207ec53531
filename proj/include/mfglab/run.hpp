#pragma once

// Run orchestration: solve, diagnose, export fields and manifests, reload saved runs.

#include "mfglab/config.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace mfglab {

inline constexpr int manifest_format_version = 1;

enum class RunStatus { converged, not_converged, error };

inline int exit_code(RunStatus s)
{
    switch (s) {
    case RunStatus::converged:
        return 0;
    case RunStatus::not_converged:
        return 2;
    case RunStatus::error:
        break;
    }
    return 1;
}

inline std::string to_string(RunStatus s)
{
    switch (s) {
    case RunStatus::converged:
        return "converged";
    case RunStatus::not_converged:
        return "non-converged";
    case RunStatus::error:
        break;
    }
    return "error";
}

struct RunOutcome {
    Json manifest;
    RunStatus status = RunStatus::error;
};

/// Shortest text of 17 significant digits; reparses to the same double.
inline std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    return out;
}

inline void close_checked(std::ofstream& out, const std::filesystem::path& path)
{
    out.close();
    if (!out) {
        throw Error("write failed for " + path.string());
    }
}

/// JSON has no infinity; keep the information as a string.
inline Json number(double v)
{
    if (std::isfinite(v)) {
        return v;
    }
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

inline Json array(const std::vector<double>& v)
{
    Json a = Json::array();
    for (double x : v) {
        a.push_back(number(x));
    }
    return a;
}

class Stopwatch {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

} // namespace detail

/// Long-format t,x,rho,p,u table, t outer and x inner.
inline void write_fields_csv(const std::filesystem::path& path, const MFGSolution& sol, const Grid& g,
                             const TimeGrid& tg)
{
    auto out = detail::open_out(path);
    out << "t,x,rho,p,u\n";
    for (std::size_t n = 0; n <= tg.steps(); ++n) {
        const std::string t = fmt17(tg.time(n));
        for (std::size_t i = 0; i < g.size(); ++i) {
            out << t << ',' << fmt17(g.center(i)) << ',' << fmt17(sol.rho.traj[n][i]) << ','
                << fmt17(sol.p.traj[n][i]) << ',' << fmt17(sol.u[n][i]) << '\n';
        }
    }
    detail::close_checked(out, path);
}

inline void write_residuals_csv(const std::filesystem::path& path, const MFGSolution& sol)
{
    auto out = detail::open_out(path);
    out << "iter,residual,cost\n";
    for (std::size_t k = 0; k < sol.residual_history.size(); ++k) {
        out << k + 1 << ',' << fmt17(sol.residual_history[k]) << ',' << fmt17(sol.cost_history[k]) << '\n';
    }
    detail::close_checked(out, path);
}

/// Writes fields.csv and residuals.csv into dir; returns the file names.
inline std::vector<std::string> export_fields(const MFGSolution& sol, const Grid& g, const TimeGrid& tg,
                                              const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    write_fields_csv(dir / "fields.csv", sol, g, tg);
    write_residuals_csv(dir / "residuals.csv", sol);
    return {"fields.csv", "residuals.csv"};
}

struct SavedFields {
    TrajectoryField rho;
    TrajectoryField p;
    TrajectoryField u;
};

/// Reads a fields.csv written for grid g and time grid tg, checking header, shape and coordinates.
inline SavedFields read_fields_csv(const std::filesystem::path& path, const Grid& g, const TimeGrid& tg)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot read " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != "t,x,rho,p,u") {
        throw Error(path.string() + ": expected header t,x,rho,p,u");
    }
    SavedFields f{TrajectoryField(tg.steps() + 1, g.size()), TrajectoryField(tg.steps() + 1, g.size()),
                  TrajectoryField(tg.steps() + 1, g.size())};
    std::size_t row = 0;
    const std::size_t rows = (tg.steps() + 1) * g.size();
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        if (row >= rows) {
            throw Error(path.string() + ": more rows than the grid allows");
        }
        double v[5];
        const char* s = line.c_str();
        for (int c = 0; c < 5; ++c) {
            char* end = nullptr;
            v[c] = std::strtod(s, &end);
            if (end == s || (c < 4 && *end != ',') || (c == 4 && *end != '\0')) {
                throw Error(path.string() + ": malformed row " + std::to_string(row + 2));
            }
            s = end + 1;
        }
        const std::size_t n = row / g.size(), i = row % g.size();
        if (std::abs(v[0] - tg.time(n)) > 1e-12 * std::max(1.0, tg.horizon()) ||
            std::abs(v[1] - g.center(i)) > 1e-12 * std::max(1.0, g.length())) {
            throw Error(path.string() + ": row " + std::to_string(row + 2) + " does not match the grid");
        }
        f.rho[n][i] = v[2];
        f.p[n][i] = v[3];
        f.u[n][i] = v[4];
        ++row;
    }
    if (row != rows) {
        throw Error(path.string() + ": expected " + std::to_string(rows) + " rows, found " + std::to_string(row));
    }
    return f;
}

inline void write_json(const std::filesystem::path& path, const Json& j)
{
    auto out = detail::open_out(path);
    out << j.dump(2) << '\n';
    detail::close_checked(out, path);
}

inline Json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot read " + path.string());
    }
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

/// Manifest without its timing block, for byte comparisons.
inline Json strip_timings(Json j)
{
    j.erase("timings");
    return j;
}

/// Diagnostics shared by `run` and `report`: residuals, costs, estimates, monotonicity, spike check.
inline Json diagnostics_json(const MFGSolution& sol, const MFGProblem& prob, const RunConfig& cfg,
                             const TrajectoryField& init)
{
    const Grid& g = prob.grid;
    const TimeGrid& tg = prob.timegrid;
    Json d;

    double mass_err = 0.0, min_rho = std::numeric_limits<double>::infinity();
    for (const auto& f : sol.rho.traj) {
        mass_err = std::max(mass_err, std::abs(integrate(f, g) - 1.0));
        for (double v : f) {
            min_rho = std::min(min_rho, v);
        }
    }
    d["mass"] = {{"max_abs_error", mass_err}, {"min_density", min_rho}};

    const MFGResidual rs = mfg_residual(sol, prob, ResidualStencil::scheme);
    const MFGResidual rc = mfg_residual(sol, prob, ResidualStencil::centered);
    d["mfg_residual"] = {{"scheme", {{"rho", rs.rho}, {"p", rs.p}}},
                         {"centered", {{"rho", rc.rho}, {"p", rc.p}}},
                         {"bound_5_dx_plus_dt", 5.0 * (g.dx() + tg.dt())}};

    const DensityField best = fp_solve(prob.rho0, drift_from_control(sol.u, prob.coef, g, tg), prob.coef, tg, g);
    d["cost"] = {{"final", evaluate_cost(sol.u, best.traj, prob)},
                 {"lower_bound", cost_lower_bound(best.traj, prob)}};

    const EnergyReport er = energy_report(best, prob.coef, g, tg);
    d["energy"] = {{"functional", er.functional},   {"sup_l2_squared", er.sup_l2_squared},
                   {"dissipation", er.dissipation}, {"C_hat", er.C_hat},
                   {"C_bound", detail::number(er.C_bound)}, {"violation", er.violation}};
    Json lm = Json::array();
    for (const LmRatio& r : lm_report(best, g)) {
        lm.push_back({{"m", detail::number(r.m)}, {"ratio", r.ratio}});
    }
    d["lm"] = lm;

    std::vector<double> rs_samples;
    for (int k = -40; k <= 40; ++k) {
        rs_samples.push_back(0.25 * k);
    }
    std::vector<std::pair<double, double>> tx;
    for (int k = 0; k < 5; ++k) {
        tx.emplace_back(tg.horizon() * k / 4.0, g.x_min() + g.length() * (k + 0.5) / 5.0);
    }
    auto env = [&](const ConvexCostSpec& G) {
        const EnvelopeBoundReport e = envelope_bound_scan(G, {0.5, 0.1, 1e-3}, rs_samples, tx);
        return Json{{"M_G", e.M_G}, {"A_linf", e.A_field_linf}, {"max_violation", e.max_violation},
                    {"violation", e.max_violation > 0.0}};
    };
    d["envelope"] = {{"running", env(prob.G)}, {"terminal", env(prob.G0.as_running())}};

    const double gap_init = monotonicity_gap(sol.rho.traj, init, prob.G, prob.G0, g, tg);
    const double gap_best = monotonicity_gap(sol.rho.traj, best.traj, prob.G, prob.G0, g, tg);
    d["monotonicity"] = {{"gap_vs_initial", gap_init},
                         {"gap_vs_best_response", gap_best},
                         {"ok", std::min(gap_init, gap_best) >= -1e-12}};

    const SpikeReport sp = optimality_spike_check(
        sol, prob, random_nodes(cfg.diagnostics.spike_nodes, cfg.diagnostics.spike_seed, g, tg));
    d["spike_check"] = {{"checked", sp.checked},
                        {"max_gap", detail::number(sp.max_gap)},
                        {"worst", {{"n", sp.worst.n}, {"i", sp.worst.i}}},
                        {"flagged", sp.flagged.size()}};
    d["cfl"] = {{"ratio", sol.p.cfl_ratio}, {"violated", sol.p.cfl_violated}};
    return d;
}

inline Json superposition_json(const SuperpositionReport& r)
{
    return {{"n_paths", r.n_paths}, {"histogram_cells", r.histogram_cells}, {"max_l1", r.max_l1}};
}

inline void write_superposition_csv(const std::filesystem::path& path, const SuperpositionReport& r)
{
    auto out = detail::open_out(path);
    out << "t,l1\n";
    for (std::size_t n = 0; n < r.times.size(); ++n) {
        out << fmt17(r.times[n]) << ',' << fmt17(r.l1_curve[n]) << '\n';
    }
    detail::close_checked(out, path);
}

namespace detail {

inline Json error_json(const std::string& stage, const std::exception& e)
{
    return {{"stage", stage}, {"message", e.what()}};
}

/// Runs `body`, recording a failure under the current stage label into the manifest.
inline RunOutcome guarded(Json manifest, const std::filesystem::path& dir,
                          const std::function<RunStatus(Json&, std::string&)>& body)
{
    RunOutcome out;
    std::string stage = "setup";
    try {
        std::filesystem::create_directories(dir);
        out.status = body(manifest, stage);
        manifest["status"] = to_string(out.status);
    } catch (const std::exception& e) {
        out.status = RunStatus::error;
        manifest["status"] = to_string(RunStatus::error);
        manifest["error"] = error_json(stage, e);
    }
    out.manifest = std::move(manifest);
    try {
        std::filesystem::create_directories(dir);
        write_json(dir / "manifest.json", out.manifest);
    } catch (const std::exception& e) {
        out.status = RunStatus::error;
        out.manifest["error"] = error_json("write_manifest", e);
    }
    return out;
}

inline Json manifest_head(const RunConfig& cfg, const std::string& command)
{
    return {{"format_version", manifest_format_version}, {"command", command}, {"config", config_to_json(cfg)}};
}

} // namespace detail

/// Full pipeline: solve the equilibrium, diagnose, optionally run particles, export.
inline RunOutcome run_scenario(const RunConfig& cfg, const std::filesystem::path& dir)
{
    return detail::guarded(detail::manifest_head(cfg, "run"), dir, [&](Json& m, std::string& stage) {
        detail::Stopwatch total;
        stage = "validate";
        validate_config(cfg);
        const MFGProblem prob = make_problem(cfg);
        const IterationConfig it = make_iteration(cfg);
        prob.validate();

        stage = "solve";
        detail::Stopwatch sw;
        const MFGSolution sol = solve_equilibrium(prob, it);
        const double t_solve = sw.seconds();
        m["converged"] = sol.converged;
        m["iterations"] = sol.residual_history.size();
        m["residual_history"] = detail::array(sol.residual_history);
        m["cost_history"] = detail::array(sol.cost_history);

        stage = "diagnostics";
        detail::Stopwatch sw2;
        m["diagnostics"] = diagnostics_json(sol, prob, cfg, initial_density(prob, it));
        const double t_diag = sw2.seconds();

        Json files = Json::array();
        double t_part = 0.0;
        if (cfg.particles.enabled) {
            stage = "particles";
            detail::Stopwatch sw3;
            const SuperpositionReport r =
                superposition_check(sol, prob, make_sde(cfg, prob.grid, prob.timegrid), cfg.particles.histogram_cells);
            t_part = sw3.seconds();
            m["superposition"] = superposition_json(r);
            write_superposition_csv(dir / "superposition.csv", r);
            files.push_back("superposition.csv");
        }

        stage = "export";
        for (const auto& f : export_fields(sol, prob.grid, prob.timegrid, dir)) {
            files.push_back(f);
        }
        files.push_back("manifest.json");
        m["files"] = files;
        m["timings"] = {{"solve_s", t_solve}, {"diagnostics_s", t_diag}, {"particles_s", t_part},
                        {"total_s", total.seconds()}};
        return sol.converged ? RunStatus::converged : RunStatus::not_converged;
    });
}

/// Kernel-vs-grid comparison for the constant drift oracle.drift under constant diffusion a0.
inline RunOutcome run_oracle(const RunConfig& cfg, const std::filesystem::path& dir)
{
    return detail::guarded(detail::manifest_head(cfg, "oracle"), dir, [&](Json& m, std::string& stage) {
        detail::Stopwatch total;
        stage = "validate";
        validate_config(cfg);
        if (cfg.diffusion.a1 != 0.0) {
            throw ConfigError("diffusion.a1: the kernel oracle requires constant diffusion (a1 = 0)");
        }
        const Grid g = make_grid(cfg);
        const TimeGrid tg = make_timegrid(cfg);
        const Field rho0 = make_rho0(cfg, g);
        const CoefficientField coef = CoefficientField::constant(cfg.diffusion.a0, 1.0, cfg.diffusion.gamma);
        const TrajectoryField drift(tg.steps() + 1, g.size(), cfg.oracle.drift);

        stage = "fp_solve";
        const DensityField grid_sol = fp_solve(rho0, drift, coef, tg, g);
        stage = "duhamel";
        const DuhamelState st =
            duhamel_fixed_point(drift, rho0, HeatKernel(cfg.diffusion.a0), {cfg.oracle.lambda, cfg.oracle.m},
                                cfg.oracle.tol, cfg.oracle.max_iter, g, tg);

        stage = "export";
        std::vector<double> l1;
        double max_l1 = 0.0;
        for (std::size_t n = 0; n <= tg.steps(); ++n) {
            l1.push_back(l1_distance(st.iterate[n], grid_sol.traj[n], g));
            max_l1 = std::max(max_l1, l1.back());
        }
        auto out = detail::open_out(dir / "oracle.csv");
        out << "t,x,fp,kernel\n";
        for (std::size_t n = 0; n <= tg.steps(); ++n) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                out << fmt17(tg.time(n)) << ',' << fmt17(g.center(i)) << ',' << fmt17(grid_sol.traj[n][i]) << ','
                    << fmt17(st.iterate[n][i]) << '\n';
            }
        }
        detail::close_checked(out, dir / "oracle.csv");

        m["converged"] = st.converged;
        m["iterations"] = st.residual_history.size();
        m["residual_history"] = detail::array(st.residual_history);
        m["contraction_factor"] = st.contraction_factor;
        m["l1_vs_fp"] = detail::array(l1);
        m["max_l1_vs_fp"] = max_l1;
        m["files"] = {"oracle.csv", "manifest.json"};
        m["timings"] = {{"total_s", total.seconds()}};
        return st.converged ? RunStatus::converged : RunStatus::not_converged;
    });
}

/// Solves the equilibrium, then runs only the superposition check.
inline RunOutcome run_particles(const RunConfig& cfg, const std::filesystem::path& dir)
{
    return detail::guarded(detail::manifest_head(cfg, "particles"), dir, [&](Json& m, std::string& stage) {
        detail::Stopwatch total;
        stage = "validate";
        validate_config(cfg);
        const MFGProblem prob = make_problem(cfg);
        prob.validate();
        stage = "solve";
        const MFGSolution sol = solve_equilibrium(prob, make_iteration(cfg));
        m["converged"] = sol.converged;
        m["iterations"] = sol.residual_history.size();
        stage = "particles";
        const SuperpositionReport r =
            superposition_check(sol, prob, make_sde(cfg, prob.grid, prob.timegrid), cfg.particles.histogram_cells);
        m["superposition"] = superposition_json(r);
        stage = "export";
        std::filesystem::create_directories(dir);
        write_superposition_csv(dir / "superposition.csv", r);
        m["files"] = {"superposition.csv", "manifest.json"};
        m["timings"] = {{"total_s", total.seconds()}};
        return sol.converged ? RunStatus::converged : RunStatus::not_converged;
    });
}

/// Rebuilds the solution of a saved `run` directory and re-derives its diagnostics into report.json.
inline Json run_report(const std::filesystem::path& dir)
{
    const Json manifest = read_json(dir / "manifest.json");
    if (!manifest.contains("format_version") || manifest.at("format_version") != manifest_format_version) {
        throw Error((dir / "manifest.json").string() + ": unsupported format_version");
    }
    if (!manifest.contains("config")) {
        throw Error((dir / "manifest.json").string() + ": missing config");
    }
    const RunConfig cfg = config_from_json(manifest.at("config"));
    const MFGProblem prob = make_problem(cfg);
    SavedFields f = read_fields_csv(dir / "fields.csv", prob.grid, prob.timegrid);

    MFGSolution sol;
    sol.rho = as_density(std::move(f.rho), prob.grid);
    sol.p.traj = std::move(f.p);
    sol.u = std::move(f.u);
    const Hamiltonian H(prob.L, prob.ball);
    sol.p.cfl_ratio = hjb_solve(sol.rho, prob.G, prob.G0, prob.coef, H, prob.timegrid, prob.grid).cfl_ratio;
    sol.p.cfl_violated = sol.p.cfl_ratio > 1.0;

    Json rep = {{"format_version", manifest_format_version},
                {"source", "fields.csv"},
                {"config", config_to_json(cfg)},
                {"diagnostics", diagnostics_json(sol, prob, cfg, initial_density(prob, make_iteration(cfg)))}};
    write_json(dir / "report.json", rep);
    return rep;
}

} // namespace mfglab
