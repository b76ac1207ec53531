#pragma once

#include "mfglab/error.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace mfglab {

/// Row i reads lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1].
/// For cyclic systems lower[0] couples to x[n-1] and upper[n-1] couples to x[0];
/// otherwise those two entries are ignored.
struct Tridiagonal {
    std::vector<double> lower;
    std::vector<double> diag;
    std::vector<double> upper;

    explicit Tridiagonal(std::size_t n) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}

    std::size_t size() const { return diag.size(); }

    /// y = A x, honoring the cyclic corners when requested.
    std::vector<double> apply(std::span<const double> x, bool cyclic) const
    {
        const std::size_t n = size();
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double v = diag[i] * x[i];
            if (i > 0) {
                v += lower[i] * x[i - 1];
            } else if (cyclic) {
                v += lower[0] * x[n - 1];
            }
            if (i + 1 < n) {
                v += upper[i] * x[i + 1];
            } else if (cyclic) {
                v += upper[n - 1] * x[0];
            }
            y[i] = v;
        }
        return y;
    }
};

namespace detail {

inline std::vector<double> thomas(std::span<const double> a, std::span<const double> b,
                                  std::span<const double> c, std::span<const double> d)
{
    const std::size_t n = b.size();
    std::vector<double> cp(n), dp(n), x(n);
    double piv = b[0];
    if (piv == 0.0 || !std::isfinite(piv)) {
        throw SolverError("tridiagonal solve: zero pivot at row 0");
    }
    cp[0] = c[0] / piv;
    dp[0] = d[0] / piv;
    for (std::size_t i = 1; i < n; ++i) {
        piv = b[i] - a[i] * cp[i - 1];
        if (piv == 0.0 || !std::isfinite(piv)) {
            throw SolverError("tridiagonal solve: zero pivot at row " + std::to_string(i));
        }
        cp[i] = (i + 1 < n ? c[i] : 0.0) / piv;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / piv;
    }
    x[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    return x;
}

} // namespace detail

/// Thomas algorithm; no pivoting, so A should be diagonally dominant by rows or columns.
inline std::vector<double> solve(const Tridiagonal& A, std::span<const double> rhs)
{
    if (rhs.size() != A.size() || A.size() == 0) {
        throw DimensionError("tridiagonal solve: rhs size mismatch");
    }
    return detail::thomas(A.lower, A.diag, A.upper, rhs);
}

/// Cyclic tridiagonal solve via Sherman-Morrison on top of the Thomas algorithm.
inline std::vector<double> solve_cyclic(const Tridiagonal& A, std::span<const double> rhs)
{
    const std::size_t n = A.size();
    if (rhs.size() != n || n < 3) {
        throw DimensionError("cyclic tridiagonal solve: need n >= 3 and matching rhs");
    }
    const double alpha = A.upper[n - 1]; // A(n-1, 0)
    const double beta = A.lower[0];      // A(0, n-1)
    const double gamma = -A.diag[0];
    if (gamma == 0.0) {
        throw SolverError("cyclic tridiagonal solve: zero leading diagonal");
    }
    std::vector<double> b(A.diag);
    b[0] -= gamma;
    b[n - 1] -= alpha * beta / gamma;

    std::vector<double> x = detail::thomas(A.lower, b, A.upper, rhs);
    std::vector<double> u(n, 0.0);
    u[0] = gamma;
    u[n - 1] = alpha;
    std::vector<double> z = detail::thomas(A.lower, b, A.upper, u);

    const double denom = 1.0 + z[0] + beta * z[n - 1] / gamma;
    if (denom == 0.0 || !std::isfinite(denom)) {
        throw SolverError("cyclic tridiagonal solve: singular Sherman-Morrison correction");
    }
    const double fact = (x[0] + beta * x[n - 1] / gamma) / denom;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] -= fact * z[i];
    }
    return x;
}

} // namespace mfglab
