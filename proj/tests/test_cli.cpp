#include "mfglab/run.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mfglab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("mfglab_test_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string error_of(const std::string& text)
{
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

RunConfig tiny()
{
    RunConfig c = parse_config(R"({"scenario": "quadratic", "grid": {"n_cells": 4, "x_min": -1, "x_max": 1},
                                   "time": {"n_steps": 2},
                                   "rho0": {"kind": "uniform"}})");
    return c;
}

} // namespace

TEST(Config, MinimalDecoupledFillsDefaults)
{
    const RunConfig c = parse_config(R"({"scenario": "decoupled"})");
    EXPECT_EQ(c.scenario, "decoupled");
    EXPECT_EQ(c.grid.n_cells, 400u);
    EXPECT_EQ(c.running_cost.kind, "linear");
    EXPECT_EQ(c.iteration.omega, 1.0);
    EXPECT_EQ(c.lagrangian.K, 512u);
}

TEST(Config, GammaNonPositiveCitesEllipticity)
{
    const std::string msg = error_of(R"({"diffusion": {"gamma": 0.0}})");
    EXPECT_NE(msg.find("diffusion.gamma"), std::string::npos) << msg;
    EXPECT_NE(msg.find("H2"), std::string::npos) << msg;
    EXPECT_NE(error_of(R"({"diffusion": {"gamma": -1.0}})").find("diffusion.gamma"), std::string::npos);
}

TEST(Config, TooFewCellsRejected)
{
    const std::string msg = error_of(R"({"grid": {"n_cells": 3}})");
    EXPECT_NE(msg.find("grid.n_cells"), std::string::npos) << msg;
    EXPECT_NE(msg.find("too small"), std::string::npos) << msg;
}

TEST(Config, UnknownKeysAndBadTypesNamed)
{
    EXPECT_NE(error_of(R"({"grid": {"ncells": 10}})").find("grid.ncells: unknown key"), std::string::npos);
    EXPECT_NE(error_of(R"({"colour": 1})").find("colour: unknown key"), std::string::npos);
    EXPECT_NE(error_of(R"({"time": {"n_steps": -2}})").find("time.n_steps"), std::string::npos);
    EXPECT_NE(error_of(R"({"iteration": {"omega": "half"}})").find("iteration.omega"), std::string::npos);
    EXPECT_NE(error_of(R"({"scenario": "chaotic"})").find("scenario"), std::string::npos);
    EXPECT_NE(error_of(R"({"particles": {"enabled": true, "histogram_cells": 7}})").find("particles.histogram_cells"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"iteration": {"omega": 1.5}})").find("iteration.omega"), std::string::npos);
}

TEST(Config, SyntaxErrorCarriesPosition)
{
    const std::string msg = error_of("{\n \"grid\": {\"n_cells\": 10,,}\n}");
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
}

TEST(Config, RenderParseRoundTrip)
{
    for (const char* name : {"decoupled", "quadratic", "congestion", "custom"}) {
        RunConfig c = scenario_defaults(name);
        c.particles.seed = 123456789012345ULL;
        c.iteration.tol = 1.0 / 3.0 * 1e-7;
        EXPECT_EQ(parse_config(render_config(c)), c) << name;
        EXPECT_EQ(render_config(parse_config(render_config(c))), render_config(c)) << name;
    }
}

TEST(Config, CommittedScenariosParse)
{
    for (const auto& e : fs::directory_iterator(fs::path(MFGLAB_SOURCE_DIR) / "scenarios")) {
        EXPECT_NO_THROW(load_config(e.path().string())) << e.path();
    }
}

TEST(Config, ProblemDensityIsNormalized)
{
    for (const char* name : {"quadratic", "congestion"}) {
        const MFGProblem prob = make_problem(scenario_defaults(name));
        EXPECT_NO_THROW(prob.validate(true)) << name;
    }
    RunConfig c = scenario_defaults("custom");
    c.grid = {0.0, 1.0, 50, "periodic"};
    c.rho0.mean = 0.9;
    c.rho0.var = 0.04;
    const MFGProblem prob = make_problem(c);
    EXPECT_NEAR(integrate(prob.rho0, prob.grid), 1.0, 1e-14);
}

TEST(Export, TwoStepFourCellRowCount)
{
    const fs::path dir = scratch("rows");
    const RunOutcome r = run_scenario(tiny(), dir);
    ASSERT_NE(r.status, RunStatus::error) << r.manifest.dump();
    std::ifstream in(dir / "fields.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,x,rho,p,u");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
    }
    EXPECT_EQ(rows, 12u);
    std::ifstream res(dir / "residuals.csv");
    std::getline(res, line);
    EXPECT_EQ(line, "iter,residual,cost");
}

TEST(Export, CsvRoundTripKeepsMass)
{
    const fs::path dir = scratch("mass");
    RunConfig c = parse_config(R"({"grid": {"n_cells": 60}, "time": {"n_steps": 20}})");
    ASSERT_EQ(run_scenario(c, dir).status, RunStatus::converged);
    const Grid g = make_grid(c);
    const TimeGrid tg = make_timegrid(c);
    const SavedFields f = read_fields_csv(dir / "fields.csv", g, tg);
    EXPECT_NEAR(integrate(f.rho.back(), g), 1.0, 1e-12);
}

TEST(Export, RepeatedRunsAreByteIdentical)
{
    RunConfig c = parse_config(R"({"scenario": "congestion", "grid": {"n_cells": 80}, "time": {"n_steps": 20},
                                   "particles": {"enabled": true, "n_paths": 2000, "histogram_cells": 40}})");
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    const RunOutcome ra = run_scenario(c, a);
    const RunOutcome rb = run_scenario(c, b);
    ASSERT_EQ(ra.status, RunStatus::converged);
    for (const char* f : {"fields.csv", "residuals.csv", "superposition.csv"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    EXPECT_EQ(strip_timings(read_json(a / "manifest.json")).dump(2),
              strip_timings(read_json(b / "manifest.json")).dump(2));
}

TEST(Export, ManifestReconstructsConfig)
{
    const fs::path dir = scratch("manifest");
    const RunConfig c = tiny();
    run_scenario(c, dir);
    const Json m = read_json(dir / "manifest.json");
    EXPECT_EQ(m.at("format_version"), manifest_format_version);
    EXPECT_EQ(config_from_json(m.at("config")), c);
    for (const char* key : {"residual_history", "cost_history", "diagnostics", "timings", "files"}) {
        EXPECT_TRUE(m.contains(key)) << key;
    }
    for (const char* key : {"energy", "lm", "envelope", "monotonicity", "spike_check", "mfg_residual"}) {
        EXPECT_TRUE(m.at("diagnostics").contains(key)) << key;
    }
}

TEST(Run, DecoupledConvergesInTwoIterations)
{
    RunConfig c = scenario_defaults("decoupled");
    c.grid.n_cells = 100;
    c.time.n_steps = 40;
    const RunOutcome r = run_scenario(c, scratch("decoupled"));
    EXPECT_EQ(r.status, RunStatus::converged);
    EXPECT_EQ(r.manifest.at("residual_history").size(), 2u);
    EXPECT_EQ(exit_code(r.status), 0);
}

TEST(Run, SingleIterationIsNonConverged)
{
    RunConfig c = scenario_defaults("quadratic");
    c.grid.n_cells = 100;
    c.time.n_steps = 40;
    c.iteration.max_iter = 1;
    const RunOutcome r = run_scenario(c, scratch("one"));
    EXPECT_EQ(r.status, RunStatus::not_converged);
    EXPECT_GT(r.manifest.at("residual_history")[0].get<double>(), 0.0);
    EXPECT_EQ(r.manifest.at("status"), "non-converged");
    EXPECT_EQ(exit_code(r.status), 2);
}

TEST(Run, SolverErrorCarriesStageLabel)
{
    RunConfig c = tiny();
    c.diffusion.gamma = -1.0;
    const fs::path dir = scratch("err");
    const RunOutcome r = run_scenario(c, dir);
    EXPECT_EQ(r.status, RunStatus::error);
    EXPECT_EQ(exit_code(r.status), 1);
    EXPECT_EQ(r.manifest.at("error").at("stage"), "validate");
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
}

TEST(Report, RederivesSavedDiagnostics)
{
    const fs::path dir = scratch("report");
    RunConfig c = parse_config(R"({"grid": {"n_cells": 60}, "time": {"n_steps": 20}})");
    const RunOutcome r = run_scenario(c, dir);
    const Json rep = run_report(dir);
    EXPECT_EQ(rep.at("diagnostics"), r.manifest.at("diagnostics"));
    EXPECT_TRUE(fs::exists(dir / "report.json"));
}

TEST(Report, RejectsTruncatedFields)
{
    const fs::path dir = scratch("trunc");
    run_scenario(tiny(), dir);
    std::string text = slurp(dir / "fields.csv");
    text.resize(text.rfind('\n', text.size() - 2) + 1);
    std::ofstream(dir / "fields.csv", std::ios::binary) << text;
    EXPECT_THROW(run_report(dir), Error);
}

TEST(Oracle, ConstantDriftAgreesWithGrid)
{
    RunConfig c = parse_config(R"({"scenario": "custom",
        "grid": {"x_min": 0.0, "x_max": 1.0, "n_cells": 50, "boundary": "periodic"},
        "time": {"n_steps": 25}, "diffusion": {"a0": 0.05, "gamma": 0.05},
        "rho0": {"mean": 0.3, "var": 0.01}, "particles": {"histogram_cells": 25}})");
    const RunOutcome r = run_oracle(c, scratch("oracle"));
    ASSERT_EQ(r.status, RunStatus::converged) << r.manifest.dump();
    EXPECT_LT(r.manifest.at("max_l1_vs_fp").get<double>(), 0.1);
    EXPECT_LT(r.manifest.at("contraction_factor").get<double>(), 1.0);

    c.diffusion.a1 = 0.01;
    EXPECT_EQ(run_oracle(c, scratch("oracle_bad")).manifest.at("error").at("stage"), "validate");
}
