#pragma once

// Euler-Maruyama simulation of dX = f0 u(t, X) dt + sqrt(2a) dW under a grid feedback,
// and comparison of the empirical marginals with the grid density.

#include "mfglab/coefficients.hpp"
#include "mfglab/error.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/mfg.hpp"
#include "mfglab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace mfglab {

enum class ParticleBoundary { reflect, wrap };

inline ParticleBoundary matching_boundary(const Grid& g)
{
    return g.periodic() ? ParticleBoundary::wrap : ParticleBoundary::reflect;
}

struct SDEConfig {
    std::size_t n_paths = 100000;
    std::uint64_t seed = 0;
    double dt = 0.0;
    ParticleBoundary boundary = ParticleBoundary::reflect;

    void validate() const
    {
        if (n_paths == 0) {
            throw InvalidParameterError("SDEConfig: n_paths must be >= 1");
        }
        if (!(dt > 0.0) || !std::isfinite(dt)) {
            throw InvalidParameterError("SDEConfig: dt must be > 0");
        }
    }
};

struct Ensemble {
    std::vector<double> positions;
    double time = 0.0;
};

/// Counter-based generator: every draw is a pure function of (seed, path, counter).
class CounterRng {
public:
    static std::uint64_t mix(std::uint64_t z)
    {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t bits(std::uint64_t seed, std::uint64_t path, std::uint64_t counter)
    {
        return mix(mix(mix(seed) ^ path) ^ counter);
    }

    /// Uniform on (0, 1).
    static double uniform(std::uint64_t seed, std::uint64_t path, std::uint64_t counter)
    {
        return (static_cast<double>(bits(seed, path, counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal for step `step` of path `path` (Box-Muller, cosine branch).
    static double normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step)
    {
        const double u1 = uniform(seed, path, 2 * step + 2);
        const double u2 = uniform(seed, path, 2 * step + 3);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
};

/// Maps a position back into [x_min, x_max] by mirror reflection or wrapping.
inline double apply_boundary(double x, const Grid& g, ParticleBoundary b)
{
    const double lo = g.x_min();
    const double L = g.length();
    if (x >= lo && x < lo + L) {
        return x;
    }
    if (b == ParticleBoundary::wrap) {
        double y = std::fmod(x - lo, L);
        if (y < 0.0) {
            y += L;
        }
        return y >= L ? lo : lo + y;
    }
    double y = std::fmod(x - lo, 2.0 * L);
    if (y < 0.0) {
        y += 2.0 * L;
    }
    if (y > L) {
        y = 2.0 * L - y;
    }
    return lo + std::clamp(y, 0.0, L);
}

/// Inverse-CDF sampling of the piecewise-constant density; uniform inside the selected cell.
inline Ensemble sample_initial(std::span<const double> rho0, const Grid& g, const SDEConfig& cfg)
{
    require_size(rho0, g, "sample_initial");
    cfg.validate();
    std::vector<double> cdf(g.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(rho0[i] >= 0.0) || !std::isfinite(rho0[i])) {
            throw InvalidDensityError("sample_initial: density must be finite and nonnegative");
        }
        acc += rho0[i];
        cdf[i] = acc;
    }
    if (!(acc > 0.0)) {
        throw InvalidDensityError("sample_initial: density has zero mass");
    }
    Ensemble ens;
    ens.positions.resize(cfg.n_paths);
    parallel_for(cfg.n_paths, [&](std::size_t k) {
        const double target = CounterRng::uniform(cfg.seed, k, 0) * acc;
        std::size_t c = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), target) - cdf.begin());
        c = std::min(c, g.size() - 1);
        while (rho0[c] == 0.0 && c > 0) {
            --c;
        }
        const double lo = g.x_min() + static_cast<double>(c) * g.dx();
        ens.positions[k] = std::min(lo + CounterRng::uniform(cfg.seed, k, 1) * g.dx(), g.x_max());
    }, 1024);
    return ens;
}

/// One step with caller-supplied standard normals, one per path.
inline Ensemble euler_maruyama_step(const Ensemble& ens, std::span<const double> u_frame, const CoefficientField& coef,
                                    double dt, const Grid& g, std::span<const double> normals,
                                    ParticleBoundary boundary)
{
    require_size(u_frame, g, "euler_maruyama_step");
    if (normals.size() != ens.positions.size()) {
        throw DimensionError("euler_maruyama_step: one normal per path required");
    }
    Ensemble out;
    out.time = ens.time + dt;
    out.positions.resize(ens.positions.size());
    const double t = ens.time;
    const double sdt = std::sqrt(dt);
    parallel_for(ens.positions.size(), [&](std::size_t k) {
        const double x = ens.positions[k];
        const double drift = coef.f0(t, x) * u_frame[g.cell_of(x)];
        const double x1 = x + drift * dt + coef.sigma(t, x) * sdt * normals[k];
        out.positions[k] = apply_boundary(x1, g, boundary);
    }, 1024);
    return out;
}

/// One step drawing the normals from the counter generator at index `step`.
inline Ensemble euler_maruyama_step(const Ensemble& ens, std::span<const double> u_frame, const CoefficientField& coef,
                                    const Grid& g, const SDEConfig& cfg, std::uint64_t step)
{
    std::vector<double> xi(ens.positions.size());
    for (std::size_t k = 0; k < xi.size(); ++k) {
        xi[k] = CounterRng::normal(cfg.seed, k, step);
    }
    return euler_maruyama_step(ens, u_frame, coef, cfg.dt, g, xi, cfg.boundary);
}

/// Cell-count histogram normalized by n dx.
inline Field empirical_density(const Ensemble& ens, const Grid& g)
{
    std::vector<std::size_t> counts(g.size(), 0);
    for (double x : ens.positions) {
        ++counts[g.cell_of(x)];
    }
    Field f(g.size());
    const double w = 1.0 / (static_cast<double>(ens.positions.size()) * g.dx());
    for (std::size_t i = 0; i < g.size(); ++i) {
        f[i] = static_cast<double>(counts[i]) * w;
    }
    return f;
}

/// Averages blocks of n_fine / n_coarse cells.
inline Field coarsen(std::span<const double> f, const Grid& fine, const Grid& coarse)
{
    require_size(f, fine, "coarsen");
    if (fine.size() % coarse.size() != 0) {
        throw InvalidParameterError("coarsen: coarse cell count must divide the fine cell count");
    }
    const std::size_t r = fine.size() / coarse.size();
    Field out(coarse.size(), 0.0);
    for (std::size_t i = 0; i < fine.size(); ++i) {
        out[i / r] += f[i] / static_cast<double>(r);
    }
    return out;
}

struct SuperpositionReport {
    /// max_n L1(empirical(t_n), rho(t_n)) on the histogram grid.
    double max_l1 = 0.0;
    std::vector<double> times;
    std::vector<double> l1_curve;
    std::size_t n_paths = 0;
    std::size_t histogram_cells = 0;
};

/// Simulates the full horizon under the drift f0 u of `sol` and compares marginals with sol.rho.
inline SuperpositionReport superposition_check(const MFGSolution& sol, const MFGProblem& prob, const SDEConfig& cfg,
                                               std::size_t histogram_cells = 100)
{
    cfg.validate();
    const Grid& g = prob.grid;
    const TimeGrid& tg = prob.timegrid;
    if (std::abs(cfg.dt - tg.dt()) > 1e-12 * tg.dt()) {
        throw InvalidParameterError("superposition_check: SDE dt must match the time grid");
    }
    if (histogram_cells == 0 || g.size() % histogram_cells != 0) {
        throw InvalidParameterError("superposition_check: histogram_cells must divide the grid cell count");
    }
    const Grid coarse(g.x_min(), g.x_max(), histogram_cells, g.periodic() ? Boundary::periodic : Boundary::no_flux);

    SuperpositionReport rep;
    rep.n_paths = cfg.n_paths;
    rep.histogram_cells = histogram_cells;
    Ensemble ens = sample_initial(prob.rho0, g, cfg);
    for (std::size_t n = 0;; ++n) {
        const Field emp = empirical_density(ens, coarse);
        const double err = l1_distance(emp, coarsen(sol.rho.traj[n], g, coarse), coarse);
        rep.times.push_back(tg.time(n));
        rep.l1_curve.push_back(err);
        rep.max_l1 = std::max(rep.max_l1, err);
        if (n == tg.steps()) {
            break;
        }
        ens = euler_maruyama_step(ens, sol.u[n], prob.coef, g, cfg, n);
        ens.time = tg.time(n + 1);
    }
    return rep;
}

} // namespace mfglab
