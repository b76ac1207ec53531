#pragma once

// Independent check of the Fokker-Planck solver for constant diffusion a:
//   K(y)(t,x) = int Gamma(t,x,0,xi) rho0(xi) dxi + int_0^t int d_xi Gamma(t,x,s,xi) b(s,xi) y(s,xi) dxi ds
// with Gamma the Gaussian heat kernel (periodized on periodic grids). The fixed point of K is the
// density transported by the drift b.
//
// Time quadrature: midpoint rule on [0, t - delta]; on [t - delta, t] b y is interpolated linearly
// between its t - delta and t frames and the s-integrals of d_xi Gamma are taken in closed form,
//   int_0^delta z/(2 a tau) Gamma(tau, z) dtau = sgn(z) erfc(|z| / (2 sqrt(a delta))) / (2 a),
//   int_0^delta z/(2 a tau) Gamma(tau, z) tau dtau = z/(2a) int_0^delta Gamma(tau, z) dtau,
// with delta = 2 dt (or t itself at the first step).

#include "mfglab/error.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/parallel.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

namespace mfglab {

struct HeatKernel {
    double a_const = 1.0;

    explicit HeatKernel(double a = 1.0) : a_const(a)
    {
        if (!(std::isfinite(a) && a > 0.0)) {
            throw InvalidParameterError("HeatKernel: diffusion constant must be > 0");
        }
    }

    /// Gamma(t, x, s, xi) with tau = t - s > 0 and z = x - xi.
    double value(double tau, double z) const
    {
        return std::exp(-z * z / (4.0 * a_const * tau)) / std::sqrt(4.0 * std::numbers::pi * a_const * tau);
    }

    /// d/dxi Gamma = Gamma (x - xi) / (2 a tau).
    double grad_xi(double tau, double z) const { return value(tau, z) * z / (2.0 * a_const * tau); }

    /// int_0^delta grad_xi(tau, z) dtau.
    double grad_xi_time_integral(double delta, double z) const
    {
        if (z == 0.0) {
            return 0.0;
        }
        const double w = std::erfc(std::abs(z) / (2.0 * std::sqrt(a_const * delta))) / (2.0 * a_const);
        return z > 0.0 ? w : -w;
    }

    /// int_0^delta Gamma(tau, z) dtau.
    double time_integral(double delta, double z) const
    {
        const double az = std::abs(z);
        return std::sqrt(delta / (std::numbers::pi * a_const)) * std::exp(-z * z / (4.0 * a_const * delta)) -
               az / (2.0 * a_const) * std::erfc(az / (2.0 * std::sqrt(a_const * delta)));
    }

    /// int_0^delta grad_xi(tau, z) tau dtau.
    double grad_xi_first_moment(double delta, double z) const
    {
        return z / (2.0 * a_const) * time_integral(delta, z);
    }

    /// Half-width beyond which the kernel is dropped.
    double cutoff(double tau) const { return 8.0 * std::sqrt(2.0 * a_const * tau); }
};

struct WeightedNormParams {
    double lambda = 1.0;
    double m = 2.0;
};

/// (sum_{n<N} sum_i e^{-lambda t_n} |y_{n,i}|^m dx dt)^{1/m}; m = infinity gives max e^{-lambda t_n} |y_{n,i}|.
inline double weighted_norm(const TrajectoryField& y, const WeightedNormParams& p, const Grid& g, const TimeGrid& tg)
{
    if (!(p.m >= 1.0)) {
        throw InvalidExponentError("weighted_norm: exponent must be >= 1");
    }
    if (!(p.lambda >= 0.0)) {
        throw InvalidParameterError("weighted_norm: lambda must be >= 0");
    }
    y.require_shape(g, tg, "weighted_norm");
    const bool inf = std::isinf(p.m);
    double s = 0.0;
    for (std::size_t n = 0; n < tg.steps(); ++n) {
        const double w = std::exp(-p.lambda * tg.time(n));
        double frame = 0.0;
        for (double v : y[n]) {
            if (inf) {
                frame = std::max(frame, std::abs(v));
            } else {
                frame += std::pow(std::abs(v), p.m);
            }
        }
        s = inf ? std::max(s, w * frame) : s + w * frame;
    }
    return inf ? s : std::pow(s * g.dx() * tg.dt(), 1.0 / p.m);
}

namespace detail {

/// Kernel samples indexed by cell offset d = i - j. Periodic grids fold images into [0, n);
/// otherwise the table spans [-(n-1), n-1] stored at index d + n - 1.
class OffsetTable {
public:
    template <class Fn>
    OffsetTable(const Grid& g, double halfwidth, Fn&& fn) : n_(g.size()), periodic_(g.periodic())
    {
        const double dx = g.dx();
        const double L = g.length();
        if (periodic_) {
            vals_.assign(n_, 0.0);
            for (std::size_t d = 0; d < n_; ++d) {
                const double z0 = static_cast<double>(d) * dx;
                const long kmax = static_cast<long>(std::ceil((halfwidth + L) / L));
                double s = 0.0;
                for (long k = -kmax; k <= kmax; ++k) {
                    const double z = z0 + static_cast<double>(k) * L;
                    if (std::abs(z) <= halfwidth) {
                        s += fn(z);
                    }
                }
                vals_[d] = s;
            }
            band_ = n_;
        } else {
            vals_.assign(2 * n_ - 1, 0.0);
            band_ = 0;
            for (std::size_t k = 0; k < 2 * n_ - 1; ++k) {
                const double z = (static_cast<double>(k) - static_cast<double>(n_ - 1)) * dx;
                if (std::abs(z) <= halfwidth) {
                    vals_[k] = fn(z);
                    band_ = std::max<std::size_t>(band_, static_cast<std::size_t>(std::abs(
                                                             static_cast<long>(k) - static_cast<long>(n_ - 1))));
                }
            }
        }
    }

    /// out[i] += scale * sum_j T(i - j) v[j] dx-free; caller applies quadrature weights.
    void convolve_add(const std::vector<double>& v, double scale, std::vector<double>& out) const
    {
        if (periodic_) {
            for (std::size_t i = 0; i < n_; ++i) {
                double s = 0.0;
                // offsets (i - j) mod n, split to keep the inner loop branch-free
                for (std::size_t j = 0; j <= i; ++j) {
                    s += vals_[i - j] * v[j];
                }
                for (std::size_t j = i + 1; j < n_; ++j) {
                    s += vals_[i + n_ - j] * v[j];
                }
                out[i] += scale * s;
            }
        } else {
            for (std::size_t i = 0; i < n_; ++i) {
                const std::size_t jlo = i > band_ ? i - band_ : 0;
                const std::size_t jhi = std::min(n_ - 1, i + band_);
                double s = 0.0;
                for (std::size_t j = jlo; j <= jhi; ++j) {
                    s += vals_[i + n_ - 1 - j] * v[j];
                }
                out[i] += scale * s;
            }
        }
    }

private:
    std::size_t n_;
    bool periodic_;
    std::size_t band_ = 0;
    std::vector<double> vals_;
};

} // namespace detail

/// Applies the Duhamel operator K to y. Frame 0 of the result is rho0.
inline TrajectoryField duhamel_apply(const TrajectoryField& y, const TrajectoryField& drift,
                                     std::span<const double> rho0, const HeatKernel& kern, const Grid& g,
                                     const TimeGrid& tg)
{
    require_size(rho0, g, "duhamel_apply");
    y.require_shape(g, tg, "duhamel_apply");
    if (drift.frames() < tg.steps()) {
        throw DimensionError("duhamel_apply: drift trajectory too short");
    }
    const std::size_t N = tg.steps();
    const std::size_t n = g.size();
    const double dt = tg.dt();
    const double dx = g.dx();

    // b * y per frame, then midpoint averages per interval
    std::vector<std::vector<double>> by(N + 1, std::vector<double>(n, 0.0));
    for (std::size_t m = 0; m <= N; ++m) {
        const Field& b = drift[std::min(m, drift.frames() - 1)];
        for (std::size_t i = 0; i < n; ++i) {
            by[m][i] = b[i] * y[m][i];
        }
    }
    std::vector<std::vector<double>> mid(N, std::vector<double>(n, 0.0));
    for (std::size_t m = 0; m + 1 < N; ++m) {
        for (std::size_t i = 0; i < n; ++i) {
            mid[m][i] = 0.5 * (by[m][i] + by[m + 1][i]);
        }
    }

    // gradient tables for tau_k = (k + 1/2) dt, k >= 2
    std::vector<detail::OffsetTable> grad_tables;
    grad_tables.reserve(N);
    for (std::size_t k = 0; k < N; ++k) {
        const double tau = (static_cast<double>(k) + 0.5) * dt;
        grad_tables.emplace_back(g, k < 2 ? -1.0 : kern.cutoff(tau),
                                 [&](double z) { return kern.grad_xi(tau, z); });
    }
    // erfc(|z| / (2 sqrt(a delta))) < 1e-16 beyond 1.25 cutoff(delta)
    // near[d] holds the weights of the t - delta frame and of the t frame for delta = d dt
    struct NearTables {
        detail::OffsetTable lagged;
        detail::OffsetTable current;
    };
    auto near_tables = [&](double delta) {
        const double hw = 1.25 * kern.cutoff(delta);
        return NearTables{detail::OffsetTable(g, hw, [&](double z) { return kern.grad_xi_first_moment(delta, z) / delta; }),
                          detail::OffsetTable(g, hw, [&](double z) {
                              return kern.grad_xi_time_integral(delta, z) - kern.grad_xi_first_moment(delta, z) / delta;
                          })};
    };
    const NearTables near1 = near_tables(dt);
    const NearTables near2 = near_tables(2.0 * dt);

    std::vector<Field> out(N + 1, Field(n, 0.0));
    out[0].assign(rho0.begin(), rho0.end());
    const std::vector<double> r0(rho0.begin(), rho0.end());

    parallel_for(N, [&](std::size_t idx) {
        const std::size_t step = idx + 1;
        const double t = tg.time(step);
        Field& o = out[step];
        const detail::OffsetTable heat(g, kern.cutoff(t), [&](double z) { return kern.value(t, z); });
        heat.convolve_add(r0, dx, o);
        const std::size_t back = std::min<std::size_t>(2, step);
        const std::size_t m_split = step - back;
        for (std::size_t m = 0; m < m_split; ++m) {
            const std::size_t k = step - m - 1;
            grad_tables[k].convolve_add(mid[m], dx * dt, o);
        }
        const NearTables& near = back == 2 ? near2 : near1;
        near.lagged.convolve_add(by[m_split], dx, o);
        near.current.convolve_add(by[step], dx, o);
    }, 1);
    return TrajectoryField(std::move(out));
}

/// Drift-free evolution of rho0 under the kernel.
inline TrajectoryField heat_evolution(std::span<const double> rho0, const HeatKernel& kern, const Grid& g,
                                      const TimeGrid& tg)
{
    const TrajectoryField zero(tg.steps() + 1, g.size(), 0.0);
    return duhamel_apply(zero, zero, rho0, kern, g, tg);
}

struct DuhamelState {
    TrajectoryField iterate;
    std::vector<double> residual_history;
    bool converged = false;
    /// max_k residual_{k+1} / residual_k over the recorded history (0 when fewer than two residuals).
    double contraction_factor = 0.0;
};

/// Picard iteration y_{k+1} = K(y_k) from the drift-free evolution, stopped when the weighted
/// distance between successive iterates drops to tol.
inline DuhamelState duhamel_fixed_point(const TrajectoryField& drift, std::span<const double> rho0,
                                        const HeatKernel& kern, const WeightedNormParams& params, double tol,
                                        std::size_t max_iter, const Grid& g, const TimeGrid& tg)
{
    if (!(params.lambda > 0.0)) {
        throw InvalidParameterError("duhamel_fixed_point: lambda must be > 0");
    }
    DuhamelState st;
    st.iterate = heat_evolution(rho0, kern, g, tg);
    for (std::size_t k = 0; k < max_iter; ++k) {
        TrajectoryField next = duhamel_apply(st.iterate, drift, rho0, kern, g, tg);
        TrajectoryField diff(tg.steps() + 1, g.size());
        for (std::size_t n = 0; n <= tg.steps(); ++n) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                diff[n][i] = next[n][i] - st.iterate[n][i];
            }
        }
        const double r = weighted_norm(diff, params, g, tg);
        if (!std::isfinite(r)) {
            throw DivergenceError("duhamel_fixed_point: residual not finite");
        }
        st.residual_history.push_back(r);
        st.iterate = std::move(next);
        if (r <= tol) {
            st.converged = true;
            break;
        }
    }
    for (std::size_t k = 1; k < st.residual_history.size(); ++k) {
        if (st.residual_history[k - 1] > 0.0) {
            st.contraction_factor =
                std::max(st.contraction_factor, st.residual_history[k] / st.residual_history[k - 1]);
        }
    }
    if (!st.converged && st.residual_history.size() >= 2 &&
        st.residual_history.back() >= st.residual_history.front()) {
        throw DivergenceError("duhamel_fixed_point: residuals did not contract in " + std::to_string(max_iter) +
                              " iterations (lambda too small or quadrature too coarse)");
    }
    return st;
}

} // namespace mfglab
