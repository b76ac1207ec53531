#pragma once

// Hamiltonian H(t,x,q) = sup_{|v| <= a} { q v - L(t,x,v) } evaluated on a uniform control grid,
// with a golden-section polish of the maximizer for convex Lagrangians.

#include "mfglab/coefficients.hpp"
#include "mfglab/error.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/parallel.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace mfglab {

struct ControlBall {
    double radius = 1.0;

    explicit ControlBall(double a = 1.0) : radius(a)
    {
        if (!(std::isfinite(a) && a > 0.0)) {
            throw InvalidParameterError("ControlBall: radius must be finite and > 0");
        }
    }
};

using LagrangianFn = std::function<double(double t, double x, double u)>;

/// Running cost L(t,x,.) on the control ball. Outside the ball L is +infinity.
struct LagrangianSpec {
    LagrangianFn eval;
    /// Grid points per half-ball.
    std::size_t control_resolution_K = 512;
    bool convexity_declared = true;
    /// True when L does not depend on (t,x); lets evaluators cache control-grid samples.
    bool autonomous = false;

    static LagrangianSpec quadratic(double weight = 1.0, std::size_t K = 512)
    {
        return {[weight](double, double, double u) { return 0.5 * weight * u * u; }, K, true, true};
    }
    static LagrangianSpec zero(std::size_t K = 512)
    {
        return {[](double, double, double) { return 0.0; }, K, true, true};
    }
    static LagrangianSpec absolute(double weight = 1.0, std::size_t K = 512)
    {
        return {[weight](double, double, double u) { return weight * std::abs(u); }, K, true, true};
    }
};

struct HamiltonianEval {
    /// max(grid sup, objective at the polished maximizer).
    double value = 0.0;
    double maximizer_u = 0.0;
    /// Sup over the control grid alone.
    double grid_value = 0.0;
};

/// Reusable evaluator; caches the control grid and, for autonomous L, the L samples.
class Hamiltonian {
public:
    Hamiltonian(LagrangianSpec L, ControlBall ball) : L_(std::move(L)), ball_(ball)
    {
        if (L_.control_resolution_K == 0) {
            throw InvalidParameterError("LagrangianSpec: control_resolution_K must be positive");
        }
        const std::size_t K = L_.control_resolution_K;
        v_.resize(2 * K + 1);
        for (std::size_t j = 0; j <= 2 * K; ++j) {
            v_[j] = ball_.radius * (static_cast<double>(static_cast<long>(j) - static_cast<long>(K)) /
                                    static_cast<double>(K));
        }
        if (L_.autonomous) {
            cache_ = sample(0.0, 0.0);
        }
    }

    const LagrangianSpec& lagrangian() const { return L_; }
    const ControlBall& ball() const { return ball_; }
    const std::vector<double>& control_grid() const { return v_; }
    double spacing() const { return ball_.radius / static_cast<double>(L_.control_resolution_K); }

    /// L(t,x,v_j) for every control-grid point.
    std::vector<double> sample(double t, double x) const
    {
        std::vector<double> l(v_.size());
        for (std::size_t j = 0; j < v_.size(); ++j) {
            l[j] = L_.eval(t, x, v_[j]);
            if (!std::isfinite(l[j])) {
                throw LagrangianEvaluationError("Lagrangian not finite at t=" + std::to_string(t) +
                                                ", x=" + std::to_string(x) + ", u=" + std::to_string(v_[j]));
            }
        }
        return l;
    }

    HamiltonianEval evaluate(double t, double x, double q, bool refine = true) const
    {
        std::vector<double> local;
        const std::vector<double>* l = &*cache_;
        if (!cache_) {
            local = sample(t, x);
            l = &local;
        }
        std::size_t best = 0;
        double best_val = q * v_[0] - (*l)[0];
        for (std::size_t j = 1; j < v_.size(); ++j) {
            const double val = q * v_[j] - (*l)[j];
            if (val > best_val ||
                (val == best_val && (std::abs(v_[j]) < std::abs(v_[best]) ||
                                     (std::abs(v_[j]) == std::abs(v_[best]) && v_[j] < v_[best])))) {
                best = j;
                best_val = val;
            }
        }
        HamiltonianEval out{best_val, v_[best], best_val};
        if (refine && L_.convexity_declared) {
            polish(t, x, q, best, out);
        }
        return out;
    }

private:
    // Golden-section search for the concave objective on the bracket around the grid arg max.
    void polish(double t, double x, double q, std::size_t j, HamiltonianEval& out) const
    {
        const double lo0 = v_[j == 0 ? 0 : j - 1];
        const double hi0 = v_[j + 1 == v_.size() ? j : j + 1];
        auto phi = [&](double v) { return q * v - L_.eval(t, x, v); };
        constexpr double inv_phi = 0.6180339887498949;
        double lo = lo0, hi = hi0;
        double c = hi - inv_phi * (hi - lo);
        double d = lo + inv_phi * (hi - lo);
        double fc = phi(c), fd = phi(d);
        for (int it = 0; it < 200 && (hi - lo) > 1e-13 * ball_.radius; ++it) {
            if (fc >= fd) {
                hi = d;
                d = c;
                fd = fc;
                c = hi - inv_phi * (hi - lo);
                fc = phi(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + inv_phi * (hi - lo);
                fd = phi(d);
            }
        }
        const double v = 0.5 * (lo + hi);
        const double val = phi(v);
        if (std::isfinite(val) && val > out.grid_value + 1e-13 * (1.0 + std::abs(out.grid_value))) {
            out.value = val;
            out.maximizer_u = v;
        }
    }

    LagrangianSpec L_;
    ControlBall ball_;
    std::vector<double> v_;
    std::optional<std::vector<double>> cache_;
};

inline HamiltonianEval hamiltonian_value(const LagrangianSpec& L, const ControlBall& ball, double t, double x,
                                         double q)
{
    return Hamiltonian(L, ball).evaluate(t, x, q);
}

/// |H(q1) - H(q2)| <= a |q1 - q2| with both sups over the same control grid, up to the rounding
/// of the two sup evaluations.
inline bool lipschitz_certificate(const Hamiltonian& H, double q1, double q2, double t, double x)
{
    const double h1 = H.evaluate(t, x, q1, false).grid_value;
    const double h2 = H.evaluate(t, x, q2, false).grid_value;
    const double rounding = 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(h1) + std::abs(h2));
    return std::abs(h1 - h2) <= H.ball().radius * std::abs(q1 - q2) + rounding;
}

inline bool lipschitz_certificate(const LagrangianSpec& L, const ControlBall& ball, double q1, double q2, double t,
                                  double x)
{
    return lipschitz_certificate(Hamiltonian(L, ball), q1, q2, t, x);
}

/// H and the maximizing control at every cell for q_i = f0(t,x_i) * grad(p)_i.
struct HamiltonianFrame {
    Field value;
    Field control;
};

inline HamiltonianFrame hamiltonian_frame(std::span<const double> p, double t, const CoefficientField& coef,
                                          const Hamiltonian& H, const Grid& g)
{
    const Field grad = gradient(p, g);
    HamiltonianFrame out{Field(g.size()), Field(g.size())};
    parallel_for(g.size(), [&](std::size_t i) {
        const double x = g.center(i);
        const HamiltonianEval e = H.evaluate(t, x, coef.f0(t, x) * grad[i]);
        out.value[i] = e.value;
        out.control[i] = e.maximizer_u;
    });
    return out;
}

/// Feedback control u(t_n, x_i) = argmax_v { f0 v dp/dx - L(v) } at every node.
inline TrajectoryField extract_control(const TrajectoryField& p, const CoefficientField& coef, const Hamiltonian& H,
                                       const Grid& g, const TimeGrid& tg)
{
    p.require_shape(g, tg, "extract_control");
    TrajectoryField u;
    for (std::size_t n = 0; n < p.frames(); ++n) {
        u.push_back(hamiltonian_frame(p[n], tg.time(n), coef, H, g).control);
    }
    return u;
}

inline TrajectoryField extract_control(const TrajectoryField& p, const CoefficientField& coef,
                                       const LagrangianSpec& L, const ControlBall& ball, const Grid& g,
                                       const TimeGrid& tg)
{
    return extract_control(p, coef, Hamiltonian(L, ball), g, tg);
}

} // namespace mfglab
