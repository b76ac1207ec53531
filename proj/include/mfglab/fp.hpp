#pragma once

// Linear Fokker-Planck solver: implicit Euler, upwind drift, conservative flux form.
//   d rho/dt = -d(b rho)/dx + d^2(a rho)/dx^2
// Each step solves (I + dt/dx A) rho^{n+1} = rho^n where every column of A sums to zero,
// so the scheme conserves mass exactly and the system matrix is an M-matrix.

#include "mfglab/coefficients.hpp"
#include "mfglab/error.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/tridiagonal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace mfglab {

struct DensityField {
    TrajectoryField traj;
    std::vector<double> mass_history;
    /// sup |b| over the face drifts actually used.
    double drift_sup = 0.0;
};

/// Assembles I + dt/dx A for one step with diffusion sampled at t and cell drifts `drift`.
inline Tridiagonal fp_matrix(std::span<const double> drift, const CoefficientField& coef, double t, double dt,
                             const Grid& g)
{
    const std::size_t n = g.size();
    const double dx = g.dx();
    const double c = dt / dx;
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = coef.a(t, g.center(i));
    }
    Tridiagonal M(n);
    std::fill(M.diag.begin(), M.diag.end(), 1.0);
    const std::size_t faces = g.periodic() ? n : n - 1;
    for (std::size_t k = 0; k < faces; ++k) {
        const std::size_t L = k;
        const std::size_t R = (k + 1) % n;
        const double b = 0.5 * (drift[L] + drift[R]);
        const double bp = std::max(b, 0.0);
        const double bm = std::min(b, 0.0);
        // flux F = bp rho_L + bm rho_R - (a_R rho_R - a_L rho_L) / dx, added to row L, removed from row R
        const double wL = c * (bp + a[L] / dx);
        const double wR = c * (bm - a[R] / dx);
        M.diag[L] += wL;
        M.diag[R] -= wR;
        if (R == L + 1) {
            M.upper[L] += wR;
            M.lower[R] -= wL;
        } else {
            M.upper[L] += wR; // A(n-1, 0)
            M.lower[R] -= wL; // A(0, n-1)
        }
    }
    return M;
}

/// One implicit step rho^n -> rho^{n+1}; diffusion is sampled at t_n + dt.
inline Field fp_step(std::span<const double> rho_n, std::span<const double> drift, const CoefficientField& coef,
                     double t_n, double dt, const Grid& g)
{
    require_size(rho_n, g, "fp_step");
    require_size(drift, g, "fp_step drift");
    if (!(dt > 0.0)) {
        throw PreconditionError("fp_step: dt must be > 0");
    }
    double scale = 0.0;
    for (double v : rho_n) {
        if (!std::isfinite(v)) {
            throw PreconditionError("fp_step: density not finite");
        }
        scale = std::max(scale, std::abs(v));
    }
    for (double v : rho_n) {
        if (v < -1e-13 * scale) {
            throw PreconditionError("fp_step: negative input density");
        }
    }
    for (double b : drift) {
        if (!std::isfinite(b)) {
            throw PreconditionError("fp_step: drift not finite");
        }
    }
    const Tridiagonal M = fp_matrix(drift, coef, t_n + dt, dt, g);
    return g.periodic() ? solve_cyclic(M, rho_n) : solve(M, rho_n);
}

/// Marches rho0 over the time grid; frame n+1 uses drift frame n.
inline DensityField fp_solve(std::span<const double> rho0, const TrajectoryField& drift, const CoefficientField& coef,
                             const TimeGrid& tg, const Grid& g)
{
    require_size(rho0, g, "fp_solve");
    if (drift.frames() < tg.steps()) {
        throw DimensionError("fp_solve: drift trajectory has " + std::to_string(drift.frames()) +
                             " frames, need at least " + std::to_string(tg.steps()));
    }
    DensityField out;
    out.traj.push_back(Field(rho0.begin(), rho0.end()));
    out.mass_history.push_back(integrate(rho0, g));
    for (std::size_t n = 0; n < tg.steps(); ++n) {
        const Field& b = drift[n];
        require_size(b, g, "fp_solve drift frame");
        const std::size_t faces = g.periodic() ? g.size() : g.size() - 1;
        for (std::size_t k = 0; k < faces; ++k) {
            out.drift_sup = std::max(out.drift_sup, std::abs(0.5 * (b[k] + b[(k + 1) % g.size()])));
        }
        Field next = fp_step(out.traj[n], b, coef, tg.time(n), tg.dt(), g);
        out.mass_history.push_back(integrate(next, g));
        out.traj.push_back(std::move(next));
    }
    return out;
}

/// Drift frames b_n = f0(t_n, x) u_n.
inline TrajectoryField drift_from_control(const TrajectoryField& u, const CoefficientField& coef, const Grid& g,
                                          const TimeGrid& tg)
{
    TrajectoryField b;
    for (std::size_t n = 0; n < u.frames(); ++n) {
        Field f(g.size());
        const double t = tg.time(std::min(n, tg.steps()));
        for (std::size_t i = 0; i < g.size(); ++i) {
            f[i] = coef.f0(t, g.center(i)) * u[n][i];
        }
        b.push_back(std::move(f));
    }
    return b;
}

struct EnergyReport {
    /// sup_n ||rho_n||^2 + gamma sum_{n>=1} ||grad rho_n||^2 dt
    double functional = 0.0;
    double sup_l2_squared = 0.0;
    double dissipation = 0.0;
    /// sqrt(functional / ||rho_0||^2)
    double C_hat = 0.0;
    /// Discrete Gronwall bound; +infinity when dt is too large for the bound to apply.
    double C_bound = std::numeric_limits<double>::infinity();
    bool violation = false;
};

/// Energy estimate check. The bound comes from testing the implicit step with rho^{n+1}:
///   S_{n+1} <= S_n / (1 - c dt),  c = 2 (sup|b| + sup|da/dx|)^2 / gamma,
/// where S_n = ||rho_n||^2 + gamma dt sum_{k<=n} ||D rho_k||^2 uses face differences. The centered
/// gradient satisfies ||grad rho||^2 <= 1.5 ||D rho||^2, hence C_T^2 = 2.5 (1 - c dt)^{-N}.
inline EnergyReport energy_report(const DensityField& rho, const CoefficientField& coef, const Grid& g,
                                  const TimeGrid& tg)
{
    rho.traj.require_shape(g, tg, "energy_report");
    EnergyReport rep;
    const double r0 = std::pow(lm_norm(rho.traj[0], g, 2.0), 2);
    for (std::size_t n = 0; n < rho.traj.frames(); ++n) {
        rep.sup_l2_squared = std::max(rep.sup_l2_squared, std::pow(lm_norm(rho.traj[n], g, 2.0), 2));
        if (n > 0) {
            rep.dissipation += std::pow(lm_norm(gradient(rho.traj[n], g), g, 2.0), 2) * tg.dt();
        }
    }
    rep.dissipation *= coef.gamma_lower;
    rep.functional = rep.sup_l2_squared + rep.dissipation;
    rep.C_hat = r0 > 0.0 ? std::sqrt(rep.functional / r0) : 0.0;

    double ax = 0.0;
    for (std::size_t n = 0; n <= tg.steps(); ++n) {
        const double t = tg.time(n);
        const std::size_t faces = g.periodic() ? g.size() : g.size() - 1;
        for (std::size_t k = 0; k < faces; ++k) {
            const double aL = coef.a(t, g.center(k));
            const double aR = coef.a(t, g.center((k + 1) % g.size()));
            ax = std::max(ax, std::abs(aR - aL) / g.dx());
        }
    }
    const double B = rho.drift_sup + ax;
    const double c = 2.0 * B * B / coef.gamma_lower;
    const double cdt = c * tg.dt();
    if (cdt < 1.0) {
        rep.C_bound = std::sqrt(2.5 * std::exp(-static_cast<double>(tg.steps()) * std::log1p(-cdt)));
    }
    rep.violation = rep.C_hat > rep.C_bound;
    return rep;
}

struct LmRatio {
    double m = 1.0;
    /// sup_n ||rho_n||_m / ||rho_0||_m
    double ratio = 0.0;
};

inline std::vector<LmRatio> lm_report(const DensityField& rho, const Grid& g,
                                      const std::vector<double>& m_list = {1.0, 2.0, 4.0,
                                                                           std::numeric_limits<double>::infinity()})
{
    std::vector<LmRatio> out;
    for (double m : m_list) {
        const double base = lm_norm(rho.traj[0], g, m);
        double sup = 0.0;
        for (const auto& f : rho.traj) {
            sup = std::max(sup, lm_norm(f, g, m));
        }
        out.push_back({m, base > 0.0 ? sup / base : 0.0});
    }
    return out;
}

} // namespace mfglab
