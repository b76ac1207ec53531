#pragma once

#include "mfglab/error.hpp"
#include "mfglab/grid.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <string>

namespace mfglab {

using SpaceTimeFn = std::function<double(double t, double x)>;

/// Diffusion a(t,x) >= gamma > 0 and the drift gain f0(t,x) of the linear drift f = f0 u.
struct CoefficientField {
    SpaceTimeFn a_coef;
    double gamma_lower = 0.0;
    SpaceTimeFn f0;
    /// Set when a(t,x) is a known constant; the heat-kernel oracle requires it.
    std::optional<double> constant_a;

    double a(double t, double x) const { return a_coef(t, x); }
    double sigma(double t, double x) const { return std::sqrt(2.0 * a_coef(t, x)); }

    static CoefficientField constant(double a, double f0, double gamma)
    {
        CoefficientField c;
        c.a_coef = [a](double, double) { return a; };
        c.gamma_lower = gamma;
        c.f0 = [f0](double, double) { return f0; };
        c.constant_a = a;
        return c;
    }

    /// Checks uniform ellipticity and boundedness of f0 at every space-time node.
    void validate(const Grid& g, const TimeGrid& tg) const
    {
        if (!(gamma_lower > 0.0) || !std::isfinite(gamma_lower)) {
            throw InvalidParameterError("CoefficientField: gamma must be > 0 (uniform ellipticity)");
        }
        for (std::size_t n = 0; n <= tg.steps(); ++n) {
            const double t = tg.time(n);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double x = g.center(i);
                const double av = a_coef(t, x);
                if (!std::isfinite(av) || av < gamma_lower) {
                    throw InvalidParameterError("CoefficientField: a(t,x) = " + std::to_string(av) +
                                                " below gamma at t=" + std::to_string(t) +
                                                ", x=" + std::to_string(x));
                }
                if (!std::isfinite(f0(t, x))) {
                    throw InvalidParameterError("CoefficientField: f0 not finite at t=" + std::to_string(t) +
                                                ", x=" + std::to_string(x));
                }
            }
        }
    }

    /// sup |f0| over the space-time nodes.
    double f0_sup(const Grid& g, const TimeGrid& tg) const
    {
        double m = 0.0;
        for (std::size_t n = 0; n <= tg.steps(); ++n) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                m = std::max(m, std::abs(f0(tg.time(n), g.center(i))));
            }
        }
        return m;
    }
};

} // namespace mfglab
