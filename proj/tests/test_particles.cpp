#include "mfglab/particles.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace mfglab;

namespace {

SDEConfig sde(std::size_t n, std::uint64_t seed, double dt, ParticleBoundary b = ParticleBoundary::reflect)
{
    SDEConfig c;
    c.n_paths = n;
    c.seed = seed;
    c.dt = dt;
    c.boundary = b;
    return c;
}

double mean(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v)
{
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) {
        s += (x - m) * (x - m);
    }
    return s / static_cast<double>(v.size() - 1);
}

MFGProblem decoupled(const Grid& g, const TimeGrid& tg)
{
    return MFGProblem{g,
                      tg,
                      CoefficientField::constant(0.1, 1.0, 0.1),
                      LagrangianSpec::quadratic(),
                      ControlBall(1.0),
                      ConvexCostSpec::linear(0.5),
                      TerminalCostSpec::from(ConvexCostSpec::linear(2.0)),
                      oracle::gaussian_field(g, 0.0, 0.04)};
}

} // namespace

TEST(CounterRng, DeterministicAndStandardNormal)
{
    EXPECT_EQ(CounterRng::bits(1, 2, 3), CounterRng::bits(1, 2, 3));
    EXPECT_NE(CounterRng::bits(1, 2, 3), CounterRng::bits(1, 3, 2));
    std::vector<double> z(200000);
    for (std::size_t k = 0; k < z.size(); ++k) {
        z[k] = CounterRng::normal(9, k, 0);
    }
    EXPECT_LE(std::abs(mean(z)), 4.0 / std::sqrt(200000.0));
    EXPECT_NEAR(variance(z), 1.0, 0.02);
}

TEST(Boundary, ReflectAndWrap)
{
    const Grid g(0.0, 1.0, 10);
    EXPECT_DOUBLE_EQ(apply_boundary(-0.2, g, ParticleBoundary::reflect), 0.2);
    EXPECT_DOUBLE_EQ(apply_boundary(1.3, g, ParticleBoundary::reflect), 0.7);
    EXPECT_NEAR(apply_boundary(2.3, g, ParticleBoundary::reflect), 0.3, 1e-15);
    EXPECT_NEAR(apply_boundary(-0.2, g, ParticleBoundary::wrap), 0.8, 1e-15);
    EXPECT_NEAR(apply_boundary(1.3, g, ParticleBoundary::wrap), 0.3, 1e-15);
    EXPECT_EQ(apply_boundary(1.0, g, ParticleBoundary::wrap), 0.0);
    EXPECT_EQ(matching_boundary(Grid(0, 1, 4, Boundary::periodic)), ParticleBoundary::wrap);
}

TEST(SampleInitial, SpikeAndErrors)
{
    const Grid g(0.0, 1.0, 10);
    Field rho(10, 0.0);
    rho[6] = 10.0;
    const auto ens = sample_initial(rho, g, sde(1000, 1, 0.1));
    for (double x : ens.positions) {
        EXPECT_EQ(g.cell_of(x), 6u);
    }
    EXPECT_THROW(sample_initial(Field(10, 0.0), g, sde(10, 1, 0.1)), InvalidDensityError);
    EXPECT_THROW(sample_initial(rho, g, sde(0, 1, 0.1)), InvalidParameterError);
}

TEST(SampleInitial, UniformKolmogorovSmirnov)
{
    const Grid g(0.0, 2.0, 50);
    const std::size_t n = 100000;
    auto ens = sample_initial(Field(50, 0.5), g, sde(n, 3, 0.1));
    std::sort(ens.positions.begin(), ens.positions.end());
    double ks = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double F = ens.positions[k] / 2.0;
        ks = std::max({ks, std::abs(F - static_cast<double>(k) / n), std::abs(F - static_cast<double>(k + 1) / n)});
    }
    EXPECT_LE(ks, 1.63 / std::sqrt(static_cast<double>(n)));
}

TEST(SampleInitial, GaussianMeanAndHistogram)
{
    const Grid g(-3.0, 3.0, 100);
    const Field rho = oracle::gaussian_field(g, 0.4, 0.04);
    const std::size_t n = 100000;
    const auto ens = sample_initial(rho, g, sde(n, 5, 0.1));
    EXPECT_LE(std::abs(mean(ens.positions) - 0.4), 4.0 * 0.2 / std::sqrt(static_cast<double>(n)));
    EXPECT_LE(l1_distance(empirical_density(ens, g), rho, g), 0.02);
    EXPECT_NEAR(integrate(empirical_density(ens, g), g), 1.0, 1e-12);
}

TEST(EulerMaruyama, SingleStepArithmetic)
{
    const Grid g(-1.0, 1.0, 4);
    const auto coef = CoefficientField::constant(0.02, 1.0, 0.02);
    Ensemble e{{0.0}, 0.0};
    const Field u(4, 0.5);
    const std::vector<double> xi{1.0};
    const auto next = euler_maruyama_step(e, u, coef, 0.01, g, xi, ParticleBoundary::reflect);
    EXPECT_NEAR(next.positions[0], 0.025, 1e-15);
    EXPECT_DOUBLE_EQ(coef.sigma(0, 0), std::sqrt(2.0 * 0.02));
}

TEST(EulerMaruyama, PureDiffusionMeanAndVariance)
{
    const Grid g(-6.0, 6.0, 240);
    const double a = 0.1, T = 1.0;
    const TimeGrid tg(T, 100);
    const auto coef = CoefficientField::constant(a, 1.0, a);
    const std::size_t n = 100000;
    const auto cfg = sde(n, 11, tg.dt());
    Ensemble e = sample_initial(oracle::gaussian_field(g, 0.0, 0.04), g, cfg);
    const Field u(240, 0.0);
    for (std::size_t k = 0; k < tg.steps(); ++k) {
        e = euler_maruyama_step(e, u, coef, g, cfg, k);
    }
    EXPECT_LE(std::abs(mean(e.positions)), 4.0 * std::sqrt(2 * a * T / n) + 4.0 * 0.2 / std::sqrt(1.0 * n));
    // piecewise-uniform sampling adds dx^2 / 12 to the initial variance
    EXPECT_NEAR(variance(e.positions), 0.24, 0.01);
}

TEST(EmpiricalDensity, SingleCellAndUniform)
{
    const Grid g(0.0, 1.0, 10);
    Ensemble one{std::vector<double>(50, 0.35), 0.0};
    const Field f = empirical_density(one, g);
    EXPECT_DOUBLE_EQ(f[3], 1.0 / g.dx());
    EXPECT_EQ(std::count(f.begin(), f.end(), 0.0), 9);

    const Grid h(0.0, 2.0, 40);
    const std::size_t n = 40000;
    Ensemble uni;
    for (std::size_t k = 0; k < n; ++k) {
        uni.positions.push_back(2.0 * (k + 0.5) / n);
    }
    for (double v : empirical_density(uni, h)) {
        EXPECT_LE(std::abs(v - 0.5), 5.0 * std::sqrt(40.0 / n) / 2.0);
    }
}

TEST(Superposition, DecoupledScalingAndDeterminism)
{
    const Grid g(-3.0, 3.0, 200);
    const TimeGrid tg(1.0, 100);
    const MFGProblem p = decoupled(g, tg);
    IterationConfig it;
    it.damping_omega = 1.0;
    it.tol = 1e-12;
    const MFGSolution sol = solve_equilibrium(p, it);
    const auto r1 = superposition_check(sol, p, sde(10000, 21, tg.dt()), 100);
    const auto r4 = superposition_check(sol, p, sde(40000, 21, tg.dt()), 100);
    const auto r5 = superposition_check(sol, p, sde(100000, 21, tg.dt()), 100);
    EXPECT_LE(r5.max_l1, 0.05);
    const double ratio = r1.max_l1 / r4.max_l1;
    EXPECT_GE(ratio, 1.6);
    EXPECT_LE(ratio, 2.6);
    const auto again = superposition_check(sol, p, sde(10000, 21, tg.dt()), 100);
    EXPECT_EQ(again.l1_curve, r1.l1_curve);
    EXPECT_EQ(r1.times.size(), tg.steps() + 1);
    EXPECT_THROW(superposition_check(sol, p, sde(100, 1, 0.5), 100), InvalidParameterError);
    EXPECT_THROW(superposition_check(sol, p, sde(100, 1, tg.dt()), 30), InvalidParameterError);
}
