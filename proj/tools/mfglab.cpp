// mfglab command-line driver.
//
//   mfglab run --config <path> [--config <path> ...] --out <dir> [--jobs N]
//   mfglab oracle --config <path> --out <dir>
//   mfglab particles --config <path> --paths N --seed S --out <dir>
//   mfglab report --in <dir>
//
// Exit status: 0 converged, 2 not converged, 1 error.

#include "mfglab/run.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;
using namespace mfglab;

namespace {

void print_summary(const std::string& label, const RunOutcome& r)
{
    std::cout << label << ": " << to_string(r.status);
    if (r.manifest.contains("iterations")) {
        std::cout << " after " << r.manifest["iterations"].get<std::size_t>() << " iterations";
    }
    if (r.manifest.contains("error")) {
        std::cout << " [" << r.manifest["error"]["stage"].get<std::string>()
                  << "] " << r.manifest["error"]["message"].get<std::string>();
    }
    std::cout << '\n';
}

int run_many(const std::vector<std::string>& configs, const fs::path& out, std::size_t jobs)
{
    std::vector<RunConfig> cfgs;
    std::vector<fs::path> dirs;
    for (const auto& path : configs) {
        cfgs.push_back(load_config(path));
        dirs.push_back(configs.size() == 1 ? out : out / fs::path(path).stem());
    }
    std::vector<RunOutcome> results(cfgs.size());
    std::atomic<std::size_t> next{0};
    std::mutex io;
    auto worker = [&] {
        for (std::size_t k = next++; k < cfgs.size(); k = next++) {
            results[k] = run_scenario(cfgs[k], dirs[k]);
            std::lock_guard lock(io);
            print_summary(configs[k], results[k]);
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < std::clamp<std::size_t>(jobs, 1, cfgs.size()); ++j) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
    int code = 0;
    for (const auto& r : results) {
        const int c = exit_code(r.status);
        code = (c == 1 || code == 1) ? 1 : std::max(code, c);
    }
    return code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Finite-difference mean field game solver"};
    app.require_subcommand(1);

    std::vector<std::string> run_configs;
    std::string run_out;
    std::size_t jobs = 1;
    auto* run = app.add_subcommand("run", "Solve the equilibrium and write fields and manifest");
    run->add_option("--config", run_configs, "Scenario config (repeatable)")->required()->check(CLI::ExistingFile);
    run->add_option("--out", run_out, "Output directory")->required();
    run->add_option("--jobs", jobs, "Independent scenarios run in parallel")->check(CLI::PositiveNumber);

    std::string oracle_config, oracle_out;
    auto* oracle = app.add_subcommand("oracle", "Compare the Duhamel fixed point with the grid solver");
    oracle->add_option("--config", oracle_config, "Scenario config")->required()->check(CLI::ExistingFile);
    oracle->add_option("--out", oracle_out, "Output directory")->required();

    std::string part_config, part_out;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    auto* particles = app.add_subcommand("particles", "Superposition check against Euler-Maruyama paths");
    particles->add_option("--config", part_config, "Scenario config")->required()->check(CLI::ExistingFile);
    auto* paths_opt = particles->add_option("--paths", paths, "Number of paths")->check(CLI::PositiveNumber);
    auto* seed_opt = particles->add_option("--seed", seed, "Random seed");
    particles->add_option("--out", part_out, "Output directory")->required();

    std::string report_in;
    auto* report = app.add_subcommand("report", "Re-derive diagnostics from a saved run directory");
    report->add_option("--in", report_in, "Run directory")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return run_many(run_configs, run_out, jobs);
        }
        if (oracle->parsed()) {
            const RunOutcome r = run_oracle(load_config(oracle_config), oracle_out);
            print_summary(oracle_config, r);
            if (r.status != RunStatus::error) {
                std::cout << "max L1 vs fp_solve: " << r.manifest["max_l1_vs_fp"].get<double>()
                          << ", contraction factor: " << r.manifest["contraction_factor"].get<double>() << '\n';
            }
            return exit_code(r.status);
        }
        if (particles->parsed()) {
            RunConfig cfg = load_config(part_config);
            if (paths_opt->count()) {
                cfg.particles.n_paths = paths;
            }
            if (seed_opt->count()) {
                cfg.particles.seed = seed;
            }
            cfg.particles.enabled = true;
            const RunOutcome r = run_particles(cfg, part_out);
            print_summary(part_config, r);
            if (r.status != RunStatus::error) {
                std::cout << "max L1 (paths vs grid): " << r.manifest["superposition"]["max_l1"].get<double>()
                          << '\n';
            }
            return exit_code(r.status);
        }
        if (report->parsed()) {
            const Json rep = run_report(report_in);
            std::cout << rep["diagnostics"].dump(2) << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
