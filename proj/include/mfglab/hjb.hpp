#pragma once

// Backward value equation for linear drift f = f0 u:
//   dp/dt + a d^2p/dx^2 + H(t, x, f0 dp/dx) = eta,   p(T) = -eta0,
// with eta in dG(rho) and eta0 in dG0(rho(T)). Diffusion is implicit, H explicit at p^{n+1}.

#include "mfglab/coefficients.hpp"
#include "mfglab/convexcost.hpp"
#include "mfglab/error.hpp"
#include "mfglab/fp.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/hamiltonian.hpp"
#include "mfglab/tridiagonal.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace mfglab {

struct ValueField {
    TrajectoryField traj;
    Field terminal;
    /// Running source eta_n = G_r(t_n, x, rho_n) used at each step.
    TrajectoryField eta;
    /// dt a max|f0| / dx; the explicit Hamiltonian is stable when <= 1.
    double cfl_ratio = 0.0;
    bool cfl_violated = false;
};

/// p(T, x_i) = -G0_r(x_i, rho_T(x_i)).
inline Field hjb_terminal(const TerminalCostSpec& G0, std::span<const double> rho_T, const Grid& g)
{
    require_size(rho_T, g, "hjb_terminal");
    Field p(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (rho_T[i] < 0.0) {
            throw PreconditionError("hjb_terminal: negative terminal density");
        }
        p[i] = -G0.subgradient(g.center(i), rho_T[i]);
    }
    return p;
}

/// I - dt a(t, x_i) D2 with D2 the plain second difference. No-flux walls use the
/// zero-second-difference closure, which reduces the wall rows to the identity.
inline Tridiagonal hjb_matrix(const CoefficientField& coef, double t, double dt, const Grid& g)
{
    const std::size_t n = g.size();
    const double k = dt / (g.dx() * g.dx());
    Tridiagonal M(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool wall = !g.periodic() && (i == 0 || i + 1 == n);
        if (wall) {
            M.diag[i] = 1.0;
            continue;
        }
        const double w = k * coef.a(t, g.center(i));
        M.diag[i] = 1.0 + 2.0 * w;
        M.lower[i] = -w;
        M.upper[i] = -w;
    }
    return M;
}

/// Right-hand side p^{n+1} + dt (H(f0 grad p^{n+1}) - eta_n); H is sampled at t_{n+1}.
inline Field hjb_rhs(std::span<const double> p_next, std::span<const double> eta_n, const CoefficientField& coef,
                     const Hamiltonian& H, double t_next, double dt, const Grid& g)
{
    const HamiltonianFrame hf = hamiltonian_frame(p_next, t_next, coef, H, g);
    Field rhs(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(hf.value[i])) {
            throw SolverError("hjb_step_backward: Hamiltonian not finite");
        }
        rhs[i] = p_next[i] + dt * (hf.value[i] - eta_n[i]);
    }
    return rhs;
}

inline Field hjb_step_backward(std::span<const double> p_next, std::span<const double> eta_n,
                               const CoefficientField& coef, const Hamiltonian& H, double t_n, double dt,
                               const Grid& g)
{
    require_size(p_next, g, "hjb_step_backward");
    require_size(eta_n, g, "hjb_step_backward eta");
    if (!(dt > 0.0)) {
        throw PreconditionError("hjb_step_backward: dt must be > 0");
    }
    const Field rhs = hjb_rhs(p_next, eta_n, coef, H, t_n + dt, dt, g);
    const Tridiagonal M = hjb_matrix(coef, t_n, dt, g);
    return g.periodic() ? solve_cyclic(M, rhs) : solve(M, rhs);
}

inline Field hjb_step_backward(std::span<const double> p_next, std::span<const double> eta_n,
                               const CoefficientField& coef, const LagrangianSpec& L, const ControlBall& ball,
                               double t_n, double dt, const Grid& g)
{
    return hjb_step_backward(p_next, eta_n, coef, Hamiltonian(L, ball), t_n, dt, g);
}

/// eta_n(x_i) = G_r(t_n, x_i, rho_n(x_i)) for every frame.
inline TrajectoryField running_source(const TrajectoryField& rho, const ConvexCostSpec& G, const Grid& g,
                                      const TimeGrid& tg)
{
    TrajectoryField eta;
    for (std::size_t n = 0; n < rho.frames(); ++n) {
        Field e(g.size());
        const double t = tg.time(n);
        for (std::size_t i = 0; i < g.size(); ++i) {
            e[i] = G.subgradient(t, g.center(i), rho[n][i]);
        }
        eta.push_back(std::move(e));
    }
    return eta;
}

inline ValueField hjb_solve(const DensityField& rho, const ConvexCostSpec& G, const TerminalCostSpec& G0,
                            const CoefficientField& coef, const Hamiltonian& H, const TimeGrid& tg, const Grid& g)
{
    rho.traj.require_shape(g, tg, "hjb_solve");
    ValueField out;
    out.eta = running_source(rho.traj, G, g, tg);
    out.terminal = hjb_terminal(G0, rho.traj.back(), g);
    out.cfl_ratio = tg.dt() * H.ball().radius * coef.f0_sup(g, tg) / g.dx();
    out.cfl_violated = out.cfl_ratio > 1.0;

    const std::size_t N = tg.steps();
    std::vector<Field> frames(N + 1);
    frames[N] = out.terminal;
    for (std::size_t n = N; n-- > 0;) {
        frames[n] = hjb_step_backward(frames[n + 1], out.eta[n], coef, H, tg.time(n), tg.dt(), g);
    }
    out.traj = TrajectoryField(std::move(frames));
    return out;
}

inline ValueField hjb_solve(const DensityField& rho, const ConvexCostSpec& G, const TerminalCostSpec& G0,
                            const CoefficientField& coef, const LagrangianSpec& L, const ControlBall& ball,
                            const TimeGrid& tg, const Grid& g)
{
    return hjb_solve(rho, G, G0, coef, Hamiltonian(L, ball), tg, g);
}

} // namespace mfglab
