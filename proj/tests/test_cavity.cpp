#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <cubicspin/cavity.hpp>

using namespace cubicspin;

namespace {

CavityParams printed_example()
{
    return CavityParams::from_cooperativity(1.0, 0.04, 10.0, 150.0, 1e6, 1000);
}

} // namespace

TEST(EffectiveCoupling, PrintedExampleGivesAlphaNearThree)
{
    const auto e = effective_coupling(printed_example());
    EXPECT_GE(e.alpha_eff, 2.8);
    EXPECT_LE(e.alpha_eff, 3.5);
    EXPECT_NEAR(e.mu_n / 1e6, 3.16e-9, 0.01e-9);
    EXPECT_NEAR(e.mu_n, e.mu_n_cooperativity, 1e-12 * e.mu_n);
    // kappa0 N = 0.67 here, outside the small-kappa0 regime
    EXPECT_FALSE(e.regime_ok);
    EXPECT_TRUE(e.detuning_ok);
}

TEST(EffectiveCoupling, NoPhotonsNoCoupling)
{
    const auto e = effective_coupling(CavityParams(1.0, 10.0, 10.0, 150.0, 0.0, 100));
    EXPECT_EQ(e.mu_n, 0.0);
    EXPECT_EQ(e.alpha_eff, 0.0);
}

TEST(EffectiveCoupling, TwoMuFormsAgree)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const CavityParams p(0.5 + u(rng), 1.0 + 20.0 * u(rng), 1.0 + 20.0 * u(rng), 100.0 + 500.0 * u(rng),
                             std::floor(1.0 + 1e6 * u(rng)), 1 + static_cast<int>(2000 * u(rng)));
        const auto e = effective_coupling(p);
        EXPECT_NEAR(e.mu_n / e.mu_n_cooperativity, 1.0, 1e-12);
    }
}

TEST(EffectiveCoupling, PulseTiming)
{
    const auto p = printed_example();
    const auto e = effective_coupling(p);
    EXPECT_NEAR(e.t0, 4.0 * e.kappa0 * e.kappa0 / p.omega(), 1e-15);
    EXPECT_DOUBLE_EQ(e.interaction_time, 2.0 * e.t0);
}

TEST(CavityParams, RejectsBadRates)
{
    EXPECT_THROW(CavityParams(0.0, 10.0, 10.0, 150.0, 1.0, 10), ValidationError);
    EXPECT_THROW(CavityParams(1.0, -1.0, 10.0, 150.0, 1.0, 10), ValidationError);
    EXPECT_THROW(CavityParams(1.0, 10.0, 10.0, 150.0, 1.5, 10), ValidationError);
    EXPECT_THROW(CavityParams(1.0, 10.0, 10.0, 150.0, 1.0, 0), ValidationError);
    EXPECT_THROW(CavityParams::from_cooperativity(1.0, 0.0, 10.0, 150.0, 1.0, 10), ValidationError);
    EXPECT_FALSE(CavityParams(1.0, 10.0, 10.0, 50.0, 1.0, 10).detuning_ok());
}

TEST(PhaseExpansion, TaylorCoefficientsMatchNumericDerivatives)
{
    for (double k0 : {1e-4, 1e-3, 5e-3}) {
        const auto c = phase_taylor_coefficients(k0);
        // central differences of the exact phase at m = 0 with step h in units of 1/k0
        const double h = 1e-3 / k0;
        auto f = [&](double m) { return exact_phase(k0, m); };
        const double d1 = (f(h) - f(-h)) / (2.0 * h);
        const double d2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        const double d3 = (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h * h * h);
        EXPECT_NEAR(-d1 / c.linear, 1.0, 1e-5);
        EXPECT_NEAR(-d2 / (2.0 * c.quadratic), 1.0, 1e-5);
        EXPECT_NEAR(-d3 / (6.0 * c.cubic), 1.0, 1e-4);
    }
}

TEST(PhaseExpansion, CoefficientIdentity)
{
    for (double k0 : {1e-5, 3e-4, 0.02}) {
        const auto c = phase_taylor_coefficients(k0);
        for (double m : {-50.0, -0.5, 0.0, 2.5, 17.0}) {
            const double series = -(0.25 * pi + c.linear * m + c.quadratic * m * m + c.cubic * m * m * m);
            EXPECT_NEAR(series, cubic_phase(k0, m), 1e-10 * std::max(1.0, std::abs(series)));
        }
        EXPECT_NEAR(c.cubic, 16.0 / 3.0 * k0 * k0 * k0, 1e-10 * c.cubic);
        EXPECT_NEAR(c.quadratic * c.quadratic / (c.linear * c.cubic), 1.5, 1e-10);
    }
}

TEST(PhaseExpansion, ExactPhaseMatchesArctanForm)
{
    const double k0 = 0.01;
    for (double m : {-20.0, -1.0, 0.0, 3.0, 10.0}) {
        const double direct = -std::atan(0.5 / (0.5 - 2.0 * k0 * m * 1.0));
        // kappa = 1, Omega = kappa0: -atan[(kappa/2)/(kappa/2 - 2 Omega m)]
        EXPECT_NEAR(exact_phase(k0, m), direct, 1e-12) << "m=" << m;
    }
}

TEST(PhaseExpansion, ErrorSmallInsideRegime)
{
    // kappa0 N = 0.05
    const CavityParams p(1.0, 10.0, 10.0, 200.0, 1.0, 100);
    ASSERT_NEAR(p.kappa0() * p.n_spins, 0.05, 1e-12);
    const auto err = phase_expansion_error(p);
    EXPECT_FALSE(err.pole_proximity);
    EXPECT_TRUE(effective_coupling(p).regime_ok);
    EXPECT_LE(err.max_error, 0.01 * err.cubic_span);
    const double x = 2.0 * p.kappa0() * p.n_spins;
    EXPECT_LE(err.max_error, std::pow(x, 4) + 1e-15);
}

TEST(PhaseExpansion, RegimeImpliesSmallRelativeError)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    for (int i = 0; i < 200; ++i) {
        const CavityParams p(0.2 + u(rng), 5.0 + 20.0 * u(rng), 10.0, 100.0 + 400.0 * u(rng), 1.0,
                             2 + static_cast<int>(1500 * u(rng)));
        if (!effective_coupling(p).regime_ok) continue;
        ++checked;
        const auto err = phase_expansion_error(p);
        EXPECT_LE(err.max_error, 0.01 * err.cubic_span);
    }
    EXPECT_GT(checked, 10);
}

TEST(PhaseExpansion, FlagsPoleNearResonance)
{
    // kappa0 = 0.1: the pole 4 kappa0 m = 1 sits at m = 5/2, on the odd-N lattice
    const CavityParams p(1.0, 1.0, 10.0, 10.0, 1.0, 101);
    EXPECT_TRUE(phase_expansion_error(p).pole_proximity);
    EXPECT_THROW(phase_expansion_error(p, {}), ValidationError);
}
