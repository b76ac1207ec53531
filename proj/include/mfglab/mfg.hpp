#pragma once

// Damped Picard coupling of the forward density equation and the backward value equation,
// plus the cost functional and the a-posteriori diagnostics used to audit an equilibrium.

#include "mfglab/coefficients.hpp"
#include "mfglab/convexcost.hpp"
#include "mfglab/error.hpp"
#include "mfglab/fp.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/hamiltonian.hpp"
#include "mfglab/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace mfglab {

struct MFGProblem {
    Grid grid;
    TimeGrid timegrid;
    CoefficientField coef;
    LagrangianSpec L;
    ControlBall ball;
    ConvexCostSpec G;
    TerminalCostSpec G0;
    Field rho0;

    /// rho0 must be a discrete probability density; strictly positive when requested.
    void validate(bool require_positive = false) const
    {
        require_size(rho0, grid, "MFGProblem rho0");
        coef.validate(grid, timegrid);
        double mn = std::numeric_limits<double>::infinity();
        for (double v : rho0) {
            if (!std::isfinite(v) || v < 0.0) {
                throw InvalidDensityError("MFGProblem: rho0 must be finite and nonnegative");
            }
            mn = std::min(mn, v);
        }
        const double mass = integrate(rho0, grid);
        if (std::abs(mass - 1.0) > 1e-12) {
            throw InvalidDensityError("MFGProblem: rho0 has mass " + std::to_string(mass) + ", expected 1");
        }
        if (require_positive && !(mn > 0.0)) {
            throw InvalidDensityError("MFGProblem: rho0 must be strictly positive");
        }
    }
};

enum class InitKind { uniform_density, rho0_frozen, custom };

struct IterationConfig {
    double damping_omega = 0.5;
    double tol = 1e-6;
    std::size_t max_iter = 200;
    InitKind init = InitKind::rho0_frozen;
    /// Initial density trajectory for InitKind::custom.
    std::optional<TrajectoryField> custom_init;
};

struct MFGSolution {
    DensityField rho;
    ValueField p;
    TrajectoryField u;
    TrajectoryField eta;
    Field eta0;
    std::vector<double> residual_history;
    /// J(u^k, rho^{u^k}) for the best response of each outer iteration.
    std::vector<double> cost_history;
    bool converged = false;
};

/// Discrete cost J(u, rho): left-endpoint rule in time for the running part, plus the terminal part.
inline double evaluate_cost(const TrajectoryField& u, const TrajectoryField& rho, const MFGProblem& prob)
{
    const Grid& g = prob.grid;
    const TimeGrid& tg = prob.timegrid;
    rho.require_shape(g, tg, "evaluate_cost rho");
    if (u.frames() < tg.steps()) {
        throw DimensionError("evaluate_cost: control trajectory too short");
    }
    const double a = prob.ball.radius;
    double running = 0.0;
    for (std::size_t n = 0; n < tg.steps(); ++n) {
        require_size(u[n], g, "evaluate_cost u");
        const double t = tg.time(n);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = u[n][i];
            if (!(std::abs(v) <= a)) {
                throw ControlOutOfBallError("evaluate_cost: |u| = " + std::to_string(std::abs(v)) +
                                            " exceeds the control radius at t=" + std::to_string(t));
            }
            const double x = g.center(i);
            running += prob.L.eval(t, x, v) * rho[n][i] + prob.G.eval(t, x, rho[n][i]);
        }
    }
    double terminal = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        terminal += prob.G0.eval(g.center(i), rho.back()[i]);
    }
    return running * g.dx() * tg.dt() + terminal * g.dx();
}

/// -int sup|L| rho + int alpha rho + int alpha0 rho(T): the a-priori lower bound of the cost.
inline double cost_lower_bound(const TrajectoryField& rho, const MFGProblem& prob)
{
    const Grid& g = prob.grid;
    const TimeGrid& tg = prob.timegrid;
    const Hamiltonian H(prob.L, prob.ball);
    double running = 0.0;
    for (std::size_t n = 0; n < tg.steps(); ++n) {
        const double t = tg.time(n);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = g.center(i);
            double supL = 0.0;
            for (double l : H.sample(t, x)) {
                supL = std::max(supL, std::abs(l));
            }
            running += (-supL + prob.G.lower_slope_alpha(t, x)) * rho[n][i];
        }
    }
    double terminal = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        terminal += prob.G0.alpha0(g.center(i)) * rho.back()[i];
    }
    return running * g.dx() * tg.dt() + terminal * g.dx();
}

inline double sup_l2_distance(const TrajectoryField& a, const TrajectoryField& b, const Grid& g)
{
    double d = 0.0;
    for (std::size_t n = 0; n < a.frames(); ++n) {
        d = std::max(d, l2_distance(a[n], b[n], g));
    }
    return d;
}

inline TrajectoryField initial_density(const MFGProblem& prob, const IterationConfig& cfg)
{
    const std::size_t frames = prob.timegrid.steps() + 1;
    switch (cfg.init) {
    case InitKind::uniform_density:
        return TrajectoryField(frames, prob.grid.size(), 1.0 / prob.grid.length());
    case InitKind::rho0_frozen:
        return TrajectoryField(std::vector<Field>(frames, prob.rho0));
    case InitKind::custom:
        if (!cfg.custom_init) {
            throw InvalidParameterError("IterationConfig: init = custom requires custom_init");
        }
        cfg.custom_init->require_shape(prob.grid, prob.timegrid, "custom_init");
        return *cfg.custom_init;
    }
    throw InvalidParameterError("IterationConfig: unknown init");
}

inline DensityField as_density(TrajectoryField traj, const Grid& g)
{
    DensityField d;
    for (const auto& f : traj) {
        d.mass_history.push_back(integrate(f, g));
    }
    d.traj = std::move(traj);
    return d;
}

/// Damped Picard iteration:
///   p^k = value(rho^k), u^{k+1} = argmax(p^k), rho~ = density(u^{k+1}),
///   rho^{k+1} = (1 - omega) rho^k + omega rho~,
/// stopped when sup_n ||rho^{k+1}(t_n) - rho^k(t_n)||_2 <= tol.
inline MFGSolution solve_equilibrium(const MFGProblem& prob, const IterationConfig& cfg)
{
    if (!(cfg.damping_omega > 0.0 && cfg.damping_omega <= 1.0)) {
        throw InvalidParameterError("IterationConfig: damping omega must lie in (0, 1]");
    }
    if (!(cfg.tol > 0.0)) {
        throw InvalidParameterError("IterationConfig: tol must be > 0");
    }
    if (cfg.max_iter == 0) {
        throw InvalidParameterError("IterationConfig: max_iter must be positive");
    }
    prob.validate();
    const Grid& g = prob.grid;
    const TimeGrid& tg = prob.timegrid;
    const Hamiltonian H(prob.L, prob.ball);
    const double w = cfg.damping_omega;

    MFGSolution sol;
    TrajectoryField rho = initial_density(prob, cfg);
    for (std::size_t k = 0; k < cfg.max_iter; ++k) {
        sol.p = hjb_solve(as_density(rho, g), prob.G, prob.G0, prob.coef, H, tg, g);
        sol.u = extract_control(sol.p.traj, prob.coef, H, g, tg);
        const DensityField best = fp_solve(prob.rho0, drift_from_control(sol.u, prob.coef, g, tg), prob.coef, tg, g);

        TrajectoryField next(tg.steps() + 1, g.size());
        for (std::size_t n = 0; n <= tg.steps(); ++n) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                next[n][i] = (1.0 - w) * rho[n][i] + w * best.traj[n][i];
            }
        }
        const double res = sup_l2_distance(next, rho, g);
        sol.residual_history.push_back(res);
        sol.cost_history.push_back(evaluate_cost(sol.u, best.traj, prob));
        rho = std::move(next);
        if (res <= cfg.tol) {
            sol.converged = true;
            break;
        }
    }
    sol.rho = as_density(std::move(rho), g);
    sol.eta = sol.p.eta;
    sol.eta0.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        sol.eta0[i] = -sol.p.terminal[i];
    }
    return sol;
}

enum class ResidualStencil {
    /// The solvers' own first-order stencils; a discrete solution has residual at rounding level.
    scheme,
    /// Second-order centered stencils (trapezoidal in time, interior cells only); measures the
    /// consistency error of a discrete solution with the continuous equations.
    centered,
};

struct MFGResidual {
    double rho = 0.0;
    double p = 0.0;
};

namespace detail {

inline double tri_apply_at(const Tridiagonal& M, std::span<const double> x, std::size_t i, bool cyclic)
{
    const std::size_t n = x.size();
    double v = M.diag[i] * x[i];
    if (i > 0) {
        v += M.lower[i] * x[i - 1];
    } else if (cyclic) {
        v += M.lower[0] * x[n - 1];
    }
    if (i + 1 < n) {
        v += M.upper[i] * x[i + 1];
    } else if (cyclic) {
        v += M.upper[n - 1] * x[0];
    }
    return v;
}

} // namespace detail

/// Discrete L2(Q_T) residuals of the density equation and the value equation.
inline MFGResidual mfg_residual(const MFGSolution& sol, const MFGProblem& prob,
                                ResidualStencil stencil = ResidualStencil::scheme)
{
    const Grid& g = prob.grid;
    const TimeGrid& tg = prob.timegrid;
    const std::size_t N = tg.steps();
    const std::size_t nc = g.size();
    const double dt = tg.dt();
    const double dx = g.dx();
    const bool cyc = g.periodic();
    sol.rho.traj.require_shape(g, tg, "mfg_residual rho");
    sol.p.traj.require_shape(g, tg, "mfg_residual p");
    const Hamiltonian H(prob.L, prob.ball);
    const TrajectoryField b = drift_from_control(sol.u, prob.coef, g, tg);
    const TrajectoryField eta = running_source(sol.rho.traj, prob.G, g, tg);
    const auto& rho = sol.rho.traj;
    const auto& p = sol.p.traj;

    double srho = 0.0;
    double sp = 0.0;
    if (stencil == ResidualStencil::scheme) {
        for (std::size_t n = 0; n < N; ++n) {
            const Tridiagonal M = fp_matrix(b[n], prob.coef, tg.time(n) + dt, dt, g);
            const Tridiagonal P = hjb_matrix(prob.coef, tg.time(n), dt, g);
            const Field rhs = hjb_rhs(p[n + 1], eta[n], prob.coef, H, tg.time(n + 1), dt, g);
            for (std::size_t i = 0; i < nc; ++i) {
                const double r1 = (detail::tri_apply_at(M, rho[n + 1], i, cyc) - rho[n][i]) / dt;
                const double r2 = (detail::tri_apply_at(P, p[n], i, cyc) - rhs[i]) / dt;
                srho += r1 * r1;
                sp += r2 * r2;
            }
        }
        return {std::sqrt(srho * dx * dt), std::sqrt(sp * dx * dt)};
    }

    // centered: D(rho) = d(b rho)/dx - d^2(a rho)/dx^2 and E(p) = a d^2p/dx^2 + H(f0 dp/dx) - eta
    auto idx = [&](long i) { return static_cast<std::size_t>((i + static_cast<long>(nc)) % static_cast<long>(nc)); };
    const std::size_t lo = cyc ? 0 : 1;
    const std::size_t hi = cyc ? nc : nc - 1;
    auto rho_op = [&](std::size_t n, std::size_t bn, std::size_t i) {
        const double t = tg.time(n);
        const std::size_t l = idx(static_cast<long>(i) - 1), r = idx(static_cast<long>(i) + 1);
        const double adv = (b[bn][r] * rho[n][r] - b[bn][l] * rho[n][l]) / (2.0 * dx);
        const double dif = (prob.coef.a(t, g.center(r)) * rho[n][r] - 2.0 * prob.coef.a(t, g.center(i)) * rho[n][i] +
                            prob.coef.a(t, g.center(l)) * rho[n][l]) /
                           (dx * dx);
        return adv - dif;
    };
    auto p_op = [&](std::size_t n, std::size_t i) {
        const double t = tg.time(n);
        const double x = g.center(i);
        const std::size_t l = idx(static_cast<long>(i) - 1), r = idx(static_cast<long>(i) + 1);
        const double d2 = (p[n][r] - 2.0 * p[n][i] + p[n][l]) / (dx * dx);
        const double d1 = (p[n][r] - p[n][l]) / (2.0 * dx);
        return prob.coef.a(t, x) * d2 + H.evaluate(t, x, prob.coef.f0(t, x) * d1).value - eta[n][i];
    };
    for (std::size_t n = 0; n < N; ++n) {
        const std::size_t bn1 = std::min(n + 1, b.frames() - 1);
        for (std::size_t i = lo; i < hi; ++i) {
            const double r1 =
                (rho[n + 1][i] - rho[n][i]) / dt + 0.5 * (rho_op(n, n, i) + rho_op(n + 1, bn1, i));
            const double r2 = (p[n + 1][i] - p[n][i]) / dt + 0.5 * (p_op(n, i) + p_op(n + 1, i));
            srho += r1 * r1;
            sp += r2 * r2;
        }
    }
    return {std::sqrt(srho * dx * dt), std::sqrt(sp * dx * dt)};
}

/// int int (G_r(rho1) - G_r(rho2)) (rho1 - rho2) + int (G0_r(rho1(T)) - G0_r(rho2(T))) (rho1(T) - rho2(T)).
/// Nonnegative for convex couplings.
inline double monotonicity_gap(const TrajectoryField& rho1, const TrajectoryField& rho2, const ConvexCostSpec& G,
                               const TerminalCostSpec& G0, const Grid& g, const TimeGrid& tg)
{
    rho1.require_shape(g, tg, "monotonicity_gap rho1");
    rho2.require_shape(g, tg, "monotonicity_gap rho2");
    double running = 0.0;
    for (std::size_t n = 0; n < tg.steps(); ++n) {
        const double t = tg.time(n);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = g.center(i);
            const double r1 = rho1[n][i], r2 = rho2[n][i];
            running += (G.subgradient(t, x, r1) - G.subgradient(t, x, r2)) * (r1 - r2);
        }
    }
    double terminal = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.center(i);
        const double r1 = rho1.back()[i], r2 = rho2.back()[i];
        terminal += (G0.subgradient(x, r1) - G0.subgradient(x, r2)) * (r1 - r2);
    }
    return running * g.dx() * tg.dt() + terminal * g.dx();
}

struct SpikeNode {
    std::size_t n = 0;
    std::size_t i = 0;
};

struct SpikeReport {
    /// max over nodes of psi(u) - min_v psi(v), psi(v) = -f0 v dp/dx + L(v), on a refined grid.
    double max_gap = 0.0;
    SpikeNode worst;
    /// Nodes whose gap exceeds the control-grid error bound (|q| + Lip L) a / K.
    std::vector<SpikeNode> flagged;
    std::size_t checked = 0;
};

/// Reproducible random node sample.
inline std::vector<SpikeNode> random_nodes(std::size_t count, std::uint64_t seed, const Grid& g, const TimeGrid& tg)
{
    std::mt19937_64 gen(seed);
    std::vector<SpikeNode> out(count);
    for (auto& s : out) {
        s.n = static_cast<std::size_t>(gen() % (tg.steps() + 1));
        s.i = static_cast<std::size_t>(gen() % g.size());
    }
    return out;
}

/// Verifies u(t_n, x_i) minimizes -f0 v dp/dx + L(v) over the ball by brute force on a control grid
/// `refine` times finer than the Hamiltonian's.
inline SpikeReport optimality_spike_check(const MFGSolution& sol, const MFGProblem& prob,
                                          const std::vector<SpikeNode>& nodes, std::size_t refine = 10)
{
    const Grid& g = prob.grid;
    const TimeGrid& tg = prob.timegrid;
    const double a = prob.ball.radius;
    const std::size_t K = prob.L.control_resolution_K;
    const std::size_t Kf = K * refine;
    SpikeReport rep;
    rep.max_gap = -std::numeric_limits<double>::infinity();
    for (const SpikeNode& node : nodes) {
        const double t = tg.time(node.n);
        const double x = g.center(node.i);
        const Field grad = gradient(sol.p.traj[node.n], g);
        const double q = prob.coef.f0(t, x) * grad[node.i];
        auto psi = [&](double v) { return -q * v + prob.L.eval(t, x, v); };
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= 2 * Kf; ++j) {
            const double v = a * (static_cast<double>(static_cast<long>(j) - static_cast<long>(Kf)) /
                                  static_cast<double>(Kf));
            best = std::min(best, psi(v));
        }
        double lip = 0.0;
        const double h = a / static_cast<double>(K);
        for (std::size_t j = 0; j < 2 * K; ++j) {
            const double v = -a + static_cast<double>(j) * h;
            lip = std::max(lip, std::abs(prob.L.eval(t, x, v + h) - prob.L.eval(t, x, v)) / h);
        }
        const double u = sol.u[node.n][node.i];
        const double gap = std::abs(u) <= a ? psi(u) - best : std::numeric_limits<double>::infinity();
        const double bound = (std::abs(q) + lip) * h;
        if (gap > rep.max_gap) {
            rep.max_gap = gap;
            rep.worst = node;
        }
        if (gap > bound) {
            rep.flagged.push_back(node);
        }
        ++rep.checked;
    }
    if (nodes.empty()) {
        rep.max_gap = 0.0;
    }
    return rep;
}

} // namespace mfglab
