#include "mfglab/grid.hpp"
#include "mfglab/tridiagonal.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace mfglab;

TEST(Grid, RejectsTooFewCells)
{
    EXPECT_THROW(Grid(0.0, 1.0, 3), GridTooSmallError);
    EXPECT_NO_THROW(Grid(0.0, 1.0, 4));
    EXPECT_THROW(Grid(1.0, 1.0, 10), InvalidParameterError);
}

TEST(Grid, CentersStrictlyIncreasing)
{
    const Grid g(-3.0, 3.0, 400);
    EXPECT_DOUBLE_EQ(g.dx(), 6.0 / 400);
    EXPECT_DOUBLE_EQ(g.center(0), -3.0 + 0.5 * g.dx());
    const auto xs = g.centers();
    for (std::size_t i = 1; i < xs.size(); ++i) {
        EXPECT_LT(xs[i - 1], xs[i]);
    }
    EXPECT_EQ(g.cell_of(-3.0), 0u);
    EXPECT_EQ(g.cell_of(3.0), 399u);
    EXPECT_EQ(g.cell_of(g.center(17)), 17u);
}

TEST(TimeGrid, HitsHorizonExactly)
{
    const TimeGrid tg(0.7, 3);
    EXPECT_EQ(tg.time(3), 0.7);
    EXPECT_EQ(tg.time(0), 0.0);
    EXPECT_THROW(TimeGrid(0.0, 3), InvalidParameterError);
    EXPECT_EQ(TimeGrid(1.0, 0).steps(), 0u);
}

TEST(Integrate, ConstantAndZero)
{
    for (std::size_t n : {4u, 7u, 100u}) {
        const Grid g(0.0, 1.0, n);
        EXPECT_NEAR(integrate(Field(n, 1.0), g), 1.0, 1e-15);
        EXPECT_EQ(integrate(Field(n, 0.0), g), 0.0);
    }
}

TEST(Integrate, MidpointQuadratic)
{
    const Grid g(0.0, 1.0, 100);
    const double v = integrate(sample(g, [](double x) { return x * x; }), g);
    // midpoint error (dx^2 / 24) * int f'' = 1/120000
    EXPECT_NEAR(v, 1.0 / 3.0 - 1.0 / 120000.0, 1e-13);
    EXPECT_NEAR(v, 0.333325, 1e-4);
}

TEST(Integrate, LengthMismatch)
{
    const Grid g(0.0, 1.0, 10);
    EXPECT_THROW(integrate(Field(9, 1.0), g), DimensionError);
}

TEST(Integrate, Linear)
{
    const Grid g(-1.0, 2.0, 37);
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Field f(37), h(37), c(37);
    for (std::size_t i = 0; i < 37; ++i) {
        f[i] = U(gen);
        h[i] = U(gen);
        c[i] = 2.5 * f[i] - 0.75 * h[i];
    }
    EXPECT_NEAR(integrate(c, g), 2.5 * integrate(f, g) - 0.75 * integrate(h, g), 1e-14);
}

TEST(Gradient, ConstantIsZero)
{
    for (auto b : {Boundary::no_flux, Boundary::periodic}) {
        const Grid g(0.0, 1.0, 12, b);
        for (double v : gradient(Field(12, 4.2), g)) {
            EXPECT_EQ(v, 0.0);
        }
    }
}

TEST(Gradient, LinearExactInterior)
{
    const Grid g(0.0, 1.0, 50);
    const Field d = gradient(sample(g, [](double x) { return x; }), g);
    for (std::size_t i = 1; i + 1 < 50; ++i) {
        EXPECT_NEAR(d[i], 1.0, 1e-12);
    }
    EXPECT_NEAR(d[0], 1.0, 1e-12);
    EXPECT_NEAR(d[49], 1.0, 1e-12);
}

TEST(Gradient, PeriodicSine)
{
    const Grid g(0.0, 2.0 * std::numbers::pi, 200, Boundary::periodic);
    const Field d = gradient(sample(g, [](double x) { return std::sin(x); }), g);
    double err = 0.0;
    for (std::size_t i = 0; i < 200; ++i) {
        err = std::max(err, std::abs(d[i] - std::cos(g.center(i))));
    }
    EXPECT_LE(err, 2e-4);
    EXPECT_LE(err, g.dx() * g.dx() / 6.0 * 1.0001);
}

TEST(LmNorm, Values)
{
    const Grid g(0.0, 1.0, 10);
    EXPECT_NEAR(lm_norm(Field(10, 1.0), g, 2.0), 1.0, 1e-15);
    EXPECT_EQ(lm_norm(Field(10, 1.0), g, std::numeric_limits<double>::infinity()), 1.0);
    EXPECT_THROW(lm_norm(Field(10, 1.0), g, 0.5), InvalidExponentError);

    const Grid g4(0.0, 1.0, 400);
    // sqrt(1/3 - dx^2/12) for the midpoint sum of x^2
    const double v = lm_norm(sample(g4, [](double x) { return x; }), g4, 2.0);
    EXPECT_NEAR(v, 1.0 / std::sqrt(3.0), 1e-4);
    EXPECT_NEAR(v * v, 1.0 / 3.0 - g4.dx() * g4.dx() / 12.0, 1e-14);
}

TEST(LmNorm, MonotoneAndHolder)
{
    const Grid g(-2.0, 2.0, 64);
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Field f(64), h(64), fh(64);
        for (std::size_t i = 0; i < 64; ++i) {
            f[i] = U(gen);
            h[i] = std::abs(f[i]) + std::abs(U(gen));
            fh[i] = std::abs(f[i] * h[i]);
        }
        for (double m : {1.0, 2.0, 3.5, std::numeric_limits<double>::infinity()}) {
            EXPECT_LE(lm_norm(f, g, m), lm_norm(h, g, m) + 1e-15);
        }
        EXPECT_LE(integrate(fh, g), lm_norm(f, g, 2.0) * lm_norm(h, g, 2.0) * (1 + 1e-14));
    }
}

TEST(Tridiagonal, SolvesAgainstDenseApply)
{
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (bool cyclic : {false, true}) {
        const std::size_t n = 9;
        Tridiagonal A(n);
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) {
            A.lower[i] = U(gen);
            A.upper[i] = U(gen);
            A.diag[i] = 3.0 + U(gen);
            x[i] = U(gen);
        }
        if (!cyclic) {
            A.lower[0] = 0.0;
            A.upper[n - 1] = 0.0;
        }
        const auto b = A.apply(x, cyclic);
        const auto y = cyclic ? solve_cyclic(A, b) : solve(A, b);
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_NEAR(y[i], x[i], 1e-13);
        }
    }
}
