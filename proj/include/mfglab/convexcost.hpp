#pragma once

// Convex couplings G(t,x,r), G0(x,r): subgradient selections, prox maps and Moreau-Yosida envelopes.

#include "mfglab/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace mfglab {

using CostFn = std::function<double(double t, double x, double r)>;
using SpaceTimeScalar = std::function<double(double t, double x)>;

/// G(t,x,.) convex with alpha(t,x) r <= G(t,x,r) <= C1 r^2 + alphabar(t,x).
struct ConvexCostSpec {
    CostFn eval;
    CostFn subgradient;
    double quad_bound_C1 = 0.0;
    SpaceTimeScalar lower_slope_alpha = [](double, double) { return 0.0; };
    SpaceTimeScalar upper_offset_alphabar = [](double, double) { return 0.0; };
    bool strictly_convex = false;

    static ConvexCostSpec zero()
    {
        return {[](double, double, double) { return 0.0; }, [](double, double, double) { return 0.0; }, 0.0,
                [](double, double) { return 0.0; }, [](double, double) { return 0.0; }, false};
    }

    /// G(r) = alpha r. The quadratic majorant uses C1 (default 1) with alphabar = alpha^2 / (4 C1).
    static ConvexCostSpec linear(double alpha, double C1 = 1.0)
    {
        const double abar = alpha * alpha / (4.0 * C1);
        return {[alpha](double, double, double r) { return alpha * r; },
                [alpha](double, double, double) { return alpha; },
                C1,
                [alpha](double, double) { return alpha; },
                [abar](double, double) { return abar; },
                false};
    }

    /// G(r) = kappa r^2 / 2.
    static ConvexCostSpec quadratic(double kappa)
    {
        return {[kappa](double, double, double r) { return 0.5 * kappa * r * r; },
                [kappa](double, double, double r) { return kappa * r; },
                0.5 * kappa,
                [](double, double) { return 0.0; },
                [](double, double) { return 0.0; },
                kappa > 0.0};
    }

    /// G(r) = kappa (r - rbar)_+^2 / 2 with rbar >= 0: no cost below the congestion threshold.
    static ConvexCostSpec threshold(double kappa, double rbar)
    {
        return {[kappa, rbar](double, double, double r) {
                    const double e = std::max(r - rbar, 0.0);
                    return 0.5 * kappa * e * e;
                },
                [kappa, rbar](double, double, double r) { return kappa * std::max(r - rbar, 0.0); },
                0.5 * kappa,
                [](double, double) { return 0.0; },
                [](double, double) { return 0.0; },
                false};
    }
};

/// Terminal cost G0(x,r); shares the machinery of ConvexCostSpec with t ignored.
struct TerminalCostSpec {
    std::function<double(double x, double r)> eval;
    std::function<double(double x, double r)> subgradient;
    double quad_bound_C10 = 0.0;
    std::function<double(double x)> alpha0 = [](double) { return 0.0; };
    std::function<double(double x)> alphabar0 = [](double) { return 0.0; };
    bool strictly_convex = false;

    static TerminalCostSpec from(const ConvexCostSpec& G)
    {
        return {[G](double x, double r) { return G.eval(0.0, x, r); },
                [G](double x, double r) { return G.subgradient(0.0, x, r); },
                G.quad_bound_C1,
                [G](double x) { return G.lower_slope_alpha(0.0, x); },
                [G](double x) { return G.upper_offset_alphabar(0.0, x); },
                G.strictly_convex};
    }

    ConvexCostSpec as_running() const
    {
        auto self = *this;
        return {[self](double, double x, double r) { return self.eval(x, r); },
                [self](double, double x, double r) { return self.subgradient(x, r); },
                quad_bound_C10,
                [self](double, double x) { return self.alpha0(x); },
                [self](double, double x) { return self.alphabar0(x); },
                strictly_convex};
    }
};

/// Spot-checks the growth sandwich and the subgradient inequality at sampled points.
inline void validate_cost(const ConvexCostSpec& G, const std::vector<std::pair<double, double>>& tx,
                          const std::vector<double>& rs, const char* name = "G")
{
    for (const auto& [t, x] : tx) {
        const double al = G.lower_slope_alpha(t, x);
        const double ab = G.upper_offset_alphabar(t, x);
        for (double r : rs) {
            const double v = G.eval(t, x, r);
            const double tol = 1e-12 * (1.0 + std::abs(v));
            if (al * r > v + tol || v > G.quad_bound_C1 * r * r + ab + tol) {
                throw ConvexityViolationError(std::string(name) + ": growth bounds violated at r=" +
                                              std::to_string(r));
            }
            const double s = G.subgradient(t, x, r);
            for (double q : rs) {
                const double lhs = G.eval(t, x, q);
                const double rhs = v + s * (q - r);
                if (lhs < rhs - 1e-10 * (1.0 + std::abs(lhs) + std::abs(rhs))) {
                    throw ConvexityViolationError(std::string(name) + ": subgradient inequality fails at r=" +
                                                  std::to_string(r) + ", s=" + std::to_string(q));
                }
            }
        }
    }
}

/// (I + eps dG)^{-1} r by bisection on theta + eps * subgradient(theta).
inline double prox(const ConvexCostSpec& G, double eps, double t, double x, double r)
{
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw InvalidParameterError("prox: eps must be > 0");
    }
    auto phi = [&](double th) { return th + eps * G.subgradient(t, x, th); };
    const double s = G.subgradient(t, x, r);
    if (!std::isfinite(s)) {
        throw InvalidParameterError("prox: subgradient not finite at r=" + std::to_string(r));
    }
    double lo = r - eps * std::max(s, 0.0);
    double hi = r - eps * std::min(s, 0.0);
    double flo = phi(lo);
    double fhi = phi(hi);
    const double slack = 1e-14 * (1.0 + std::abs(r) + eps * std::abs(s));
    if (flo > r + slack || fhi < r - slack) {
        throw ConvexityViolationError("prox: subgradient selection is not monotone near r=" + std::to_string(r));
    }
    if (flo >= r) {
        return lo;
    }
    if (fhi <= r) {
        return hi;
    }
    for (int it = 0; it < 2100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        const double fm = phi(mid);
        if (fm < flo || fm > fhi) {
            throw ConvexityViolationError("prox: subgradient selection is not monotone near r=" +
                                          std::to_string(mid));
        }
        if (fm < r) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    if (flo == r) {
        return lo;
    }
    if (fhi == r) {
        return hi;
    }
    return 0.5 * (lo + hi);
}

/// G_eps(r) = |r - prox|^2 / (2 eps) + G(prox).
inline double moreau_value(const ConvexCostSpec& G, double eps, double t, double x, double r)
{
    const double th = prox(G, eps, t, x, r);
    return (r - th) * (r - th) / (2.0 * eps) + G.eval(t, x, th);
}

/// G_eps'(r) = (r - prox) / eps.
inline double moreau_derivative(const ConvexCostSpec& G, double eps, double t, double x, double r)
{
    return (r - prox(G, eps, t, x, r)) / eps;
}

struct EnvelopeBoundReport {
    double M_G = 0.0;
    double A_field_linf = 0.0;
    /// max over samples of |G_eps'(r)| - (M_G |r| + A(t,x)); <= 0 means the bound held.
    double max_violation = 0.0;
};

/// Slope constant of the linear-growth bound on G_eps', valid for every eps.
inline double envelope_slope_bound(double C1)
{
    return 2.0 * C1 + 2.0 * std::sqrt(C1 * (C1 + 0.5));
}

/// Offset A(t,x) of the linear-growth bound, valid for eps < eps0.
inline double envelope_offset_bound(double C1, double alpha, double alphabar, double eps0)
{
    return 2.0 * std::sqrt(C1 * (std::max(alphabar, 0.0) + 0.5 * (1.0 + eps0) * alpha * alpha));
}

/// Checks |G_eps'(t,x,r)| <= M_G |r| + A(t,x) over eps_list x tx x r_samples.
inline EnvelopeBoundReport envelope_bound_scan(const ConvexCostSpec& G, const std::vector<double>& eps_list,
                                               const std::vector<double>& r_samples,
                                               const std::vector<std::pair<double, double>>& tx = {{0.0, 0.0}},
                                               double eps0 = 1.0)
{
    EnvelopeBoundReport rep;
    rep.M_G = envelope_slope_bound(G.quad_bound_C1);
    rep.max_violation = -std::numeric_limits<double>::infinity();
    for (double eps : eps_list) {
        if (!(eps > 0.0 && eps < eps0)) {
            throw InvalidParameterError("envelope_bound_scan: eps must lie in (0, eps0)");
        }
    }
    for (const auto& [t, x] : tx) {
        const double A = envelope_offset_bound(G.quad_bound_C1, G.lower_slope_alpha(t, x),
                                               G.upper_offset_alphabar(t, x), eps0);
        rep.A_field_linf = std::max(rep.A_field_linf, A);
        for (double eps : eps_list) {
            for (double r : r_samples) {
                const double d = moreau_derivative(G, eps, t, x, r);
                rep.max_violation = std::max(rep.max_violation, std::abs(d) - (rep.M_G * std::abs(r) + A));
            }
        }
    }
    return rep;
}

} // namespace mfglab
