#include "mfglab/hamiltonian.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace mfglab;

namespace {

// Conjugate of u^2/2 on [-a, a]
double huber(double q, double a)
{
    return std::abs(q) <= a ? 0.5 * q * q : a * std::abs(q) - 0.5 * a * a;
}

} // namespace

TEST(ControlBall, Validates)
{
    EXPECT_THROW(ControlBall(0.0), InvalidParameterError);
    EXPECT_THROW(ControlBall(-1.0), InvalidParameterError);
    EXPECT_THROW(ControlBall(std::nan("")), InvalidParameterError);
}

TEST(Hamiltonian, ZeroLagrangianLinearObjective)
{
    const auto e = hamiltonian_value(LagrangianSpec::zero(), ControlBall(1.0), 0.0, 0.0, 0.7);
    EXPECT_DOUBLE_EQ(e.value, 0.7);
    EXPECT_DOUBLE_EQ(e.maximizer_u, 1.0);
}

TEST(Hamiltonian, TieBreakPrefersSmallestControl)
{
    const auto e = hamiltonian_value(LagrangianSpec::zero(), ControlBall(1.0), 0.0, 0.0, 0.0);
    EXPECT_EQ(e.value, 0.0);
    EXPECT_EQ(e.maximizer_u, 0.0);
    // L = |u| - 1 flat region: -q v + |v| tie at q = 1 over [0, a] picks v = 0
    const auto f = hamiltonian_value(LagrangianSpec::absolute(1.0), ControlBall(1.0), 0.0, 0.0, 1.0);
    EXPECT_NEAR(f.value, 0.0, 1e-15);
    EXPECT_EQ(f.maximizer_u, 0.0);
}

TEST(Hamiltonian, QuadraticInteriorAndSaturated)
{
    const auto L = LagrangianSpec::quadratic();
    const auto a = hamiltonian_value(L, ControlBall(1.0), 0.0, 0.0, 0.5);
    EXPECT_NEAR(a.value, 0.125, 1e-14);
    EXPECT_NEAR(a.maximizer_u, 0.5, 1e-12);
    const auto b = hamiltonian_value(L, ControlBall(1.0), 0.0, 0.0, 2.0);
    EXPECT_NEAR(b.value, 1.5, 1e-14);
    EXPECT_EQ(b.maximizer_u, 1.0);
}

TEST(Hamiltonian, PolishRecoversOffGridMaximizer)
{
    const Hamiltonian H(LagrangianSpec::quadratic(), ControlBall(1.0));
    const double q = 0.3001234;
    const auto e = H.evaluate(0.0, 0.0, q);
    EXPECT_NEAR(e.maximizer_u, q, 1e-7);
    EXPECT_NEAR(e.value, 0.5 * q * q, 1e-15);
    EXPECT_LE(e.grid_value, e.value);
    const auto raw = H.evaluate(0.0, 0.0, q, false);
    EXPECT_EQ(raw.value, raw.grid_value);
    EXPECT_LE(std::abs(raw.maximizer_u - q), 0.5 * H.spacing() + 1e-15);
}

TEST(Hamiltonian, HuberAgreementWithinGridBound)
{
    const double a = 1.5;
    const Hamiltonian H(LagrangianSpec::quadratic(1.0, 64), ControlBall(a));
    for (int k = -300; k <= 300; ++k) {
        const double q = 3.0 * a * k / 300.0;
        const auto e = H.evaluate(0.0, 0.0, q, false);
        EXPECT_LE(std::abs(e.value - huber(q, a)), (std::abs(q) + a) * a / 64.0);
        const auto r = H.evaluate(0.0, 0.0, q);
        EXPECT_NEAR(r.value, huber(q, a), 1e-12);
    }
}

TEST(Hamiltonian, FenchelYoung)
{
    const Hamiltonian H(LagrangianSpec::quadratic(2.0, 32), ControlBall(1.0));
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> U(-4.0, 4.0);
    for (int k = 0; k < 100; ++k) {
        const double q = U(gen);
        const auto e = H.evaluate(0.0, 0.0, q);
        for (double v : H.control_grid()) {
            EXPECT_GE(e.value, q * v - v * v - 1e-14);
        }
        EXPECT_NEAR(e.value, q * e.maximizer_u - e.maximizer_u * e.maximizer_u, 1e-14);
    }
}

TEST(Hamiltonian, MaximizerMonotoneForStrictlyConvexL)
{
    const Hamiltonian H(LagrangianSpec::quadratic(), ControlBall(1.0));
    double prev = -2.0;
    for (int k = -100; k <= 100; ++k) {
        const double u = H.evaluate(0.0, 0.0, 0.03 * k).maximizer_u;
        EXPECT_LE(prev, u);
        prev = u;
    }
}

TEST(Hamiltonian, NonFiniteLagrangianThrows)
{
    LagrangianSpec L{[](double, double, double u) { return u > 0.5 ? std::nan("") : 0.0; }, 8, true, false};
    EXPECT_THROW(hamiltonian_value(L, ControlBall(1.0), 0.0, 0.0, 1.0), LagrangianEvaluationError);
    LagrangianSpec bad = LagrangianSpec::zero(0);
    EXPECT_THROW(Hamiltonian(bad, ControlBall(1.0)), InvalidParameterError);
}

TEST(Lipschitz, CertificateExamples)
{
    EXPECT_TRUE(lipschitz_certificate(LagrangianSpec::quadratic(), ControlBall(1.0), 0.3, 0.3, 0.0, 0.0));
    const auto h0 = hamiltonian_value(LagrangianSpec::quadratic(), ControlBall(1.0), 0, 0, 0.0).value;
    const auto h10 = hamiltonian_value(LagrangianSpec::quadratic(), ControlBall(1.0), 0, 0, 10.0).value;
    EXPECT_NEAR(h10 - h0, 9.5, 1e-13);
    EXPECT_TRUE(lipschitz_certificate(LagrangianSpec::quadratic(), ControlBall(1.0), 0.0, 10.0, 0.0, 0.0));
    EXPECT_TRUE(lipschitz_certificate(LagrangianSpec::zero(), ControlBall(2.0), -1.0, 1.0, 0.0, 0.0));
}

TEST(Lipschitz, RandomPairsNonAutonomous)
{
    LagrangianSpec L{[](double t, double x, double u) { return (1.0 + t + x * x) * u * u + std::sin(x) * u; },
                     128, true, false};
    const Hamiltonian H(L, ControlBall(0.8));
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> U(-5.0, 5.0);
    for (int k = 0; k < 500; ++k) {
        EXPECT_TRUE(lipschitz_certificate(H, U(gen), U(gen), 0.3, U(gen)));
    }
}

TEST(ExtractControl, ClampFormula)
{
    const Grid g(0.0, 1.0, 10);
    const TimeGrid tg(1.0, 2);
    const auto coef = CoefficientField::constant(0.1, 1.0, 0.1);
    auto linear = [&](double slope) {
        TrajectoryField p;
        for (int n = 0; n < 3; ++n) {
            p.push_back(sample(g, [&](double x) { return slope * x; }));
        }
        return p;
    };
    const auto L = LagrangianSpec::quadratic();
    for (auto [slope, expect] : {std::pair{0.3, 0.3}, std::pair{5.0, 1.0}, std::pair{0.0, 0.0}, std::pair{-2.0, -1.0}}) {
        const auto u = extract_control(linear(slope), coef, L, ControlBall(1.0), g, tg);
        for (const auto& f : u) {
            for (double v : f) {
                EXPECT_NEAR(v, expect, 1e-7);
                EXPECT_LE(std::abs(v), 1.0);
            }
        }
    }
    EXPECT_THROW(extract_control(TrajectoryField(2, 10), coef, L, ControlBall(1.0), g, tg), DimensionError);
}
