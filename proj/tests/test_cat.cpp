#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include <cubicspin/cat.hpp>

using namespace cubicspin;

namespace {

DickeVector equator(int n) { return css_state(SpinEnsemble(n), CssParams(0.5 * pi, 0.0)); }

DickeVector cubic_at(int n, double t) { return evolve_zdiag(equator(n), ZDiagonalHamiltonian::cubic(), t); }

} // namespace

TEST(FourierCoeffs, ReproducesCubicPhaseOnLattice)
{
    for (int n : {1, 3, 4, 12})
        for (Parity par : {Parity::even, Parity::odd}) {
            const auto f = fourier_coeffs(n, par);
            const int period = fourier_period(n, par);
            for (int j = -7; j <= 7; ++j) {
                const double m = par == Parity::even ? j : j + 0.5;
                Complex acc = 0.0;
                for (int q = 0; q < period; ++q) acc += f[q] * std::polar(1.0, -fourier_phase(q, n, par) * m);
                EXPECT_LT(std::abs(acc - std::polar(1.0, -pi * m * m * m / n)), 1e-12) << "n=" << n << " m=" << m;
            }
        }
}

TEST(FourierCoeffs, UnitNormOfCoefficientVector)
{
    for (int n : {2, 5, 12, 30})
        for (Parity par : {Parity::even, Parity::odd}) {
            const auto f = fourier_coeffs(n, par);
            double s = 0.0;
            for (Complex c : f) s += std::norm(c);
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
}

TEST(FourierCoeffs, IntegerFourPeriodHasFourHalves)
{
    const auto d = decompose_cat(4, Parity::even);
    ASSERT_EQ(d.components.size(), 4u);
    for (const auto& c : d.components) EXPECT_NEAR(std::abs(c.amplitude), 0.5, 1e-12);
}

TEST(CatState, MatchesDirectEvolution)
{
    for (int n_spins : {20, 21, 200, 201})
        for (int n : {2, 3, 4, 6, 12}) {
            const SpinEnsemble e(n_spins);
            const auto cat = cat_state(e, n);
            const auto direct = cubic_at(n_spins, pi / n);
            EXPECT_GE(std::abs(cat.state.overlap(direct)), 1.0 - 1e-10) << "N=" << n_spins << " n=" << n;
        }
}

TEST(CatState, OddNAtThirdTurnIsSingleGhzPair)
{
    const auto d = decompose_cat(3, Parity::odd);
    ASSERT_EQ(d.ghz.size(), 1u);
    EXPECT_NEAR(std::norm(d.ghz[0].weight), 1.0, 1e-12);
    EXPECT_NEAR(qfi_pure(cat_state(SpinEnsemble(201), 3).state).qfi / (201.0 * 201.0), 1.0, 1e-9);
}

TEST(CatState, GhzWeightsSumToOne)
{
    for (int n : {4, 6, 12})
        for (Parity par : {Parity::even, Parity::odd}) {
            double s = 0.0;
            for (const auto& g : decompose_cat(n, par).ghz) s += std::norm(g.weight);
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
}

TEST(GhzState, MaximalQfiAndSignsOrthogonal)
{
    const SpinEnsemble e(30);
    const auto p = ghz_state(e, 0.4, GhzSign::plus);
    const auto m = ghz_state(e, 0.4, GhzSign::minus);
    EXPECT_NEAR(std::abs(p.overlap(m)), 0.0, 1e-12);
    EXPECT_NEAR(p.norm(), 1.0, 1e-12);
    EXPECT_NEAR(qfi_pure(p).qfi, 900.0, 1e-8);
}

TEST(GhzProjection, SingleComponentIsHeisenberg)
{
    const std::vector<GhzComponent> one{{0.3, GhzSign::plus, Complex(1.0)}};
    const auto r = ghz_projection_qfi(one, 100);
    EXPECT_NEAR(r.qfi, 10000.0, 1e-9);
    EXPECT_NEAR(r.phi_opt, 0.3, 1e-12);
}

TEST(GhzProjection, OrthogonalPairAveragesDown)
{
    // Two GHZ pairs pi/4 apart with equal weight cancel the cos 2 phi term.
    const std::vector<GhzComponent> two{{0.0, GhzSign::plus, Complex(1.0)}, {0.25 * pi, GhzSign::plus, Complex(1.0)}};
    const double s = 50.0;
    EXPECT_NEAR(ghz_projection_qfi(two, 100).qfi, 2.0 * s * s + s + (2.0 * s * s - s) / std::sqrt(2.0), 1e-9);
}

TEST(GhzProjection, TracksExactQfiOnPeaksAtLargeN)
{
    const int n_spins = 1500;
    for (int k = 1; k <= 3; ++k) {
        const int n = 12 * k;
        const double exact = qfi_pure(cubic_at(n_spins, pi / n)).qfi;
        const double est = ghz_projection_qfi(decompose_cat(n, Parity::even).ghz, n_spins).qfi;
        EXPECT_NEAR(est / exact, 1.0, 1e-3) << "k=" << k;
    }
}

TEST(PeakSchedule, EvenAndOddTimes)
{
    const auto e = peak_schedule(Parity::even, 3);
    EXPECT_NEAR(e[0], pi / 12.0, 1e-15);
    EXPECT_NEAR(e[2], pi / 36.0, 1e-15);
    const auto o = peak_schedule(Parity::odd, 3);
    EXPECT_NEAR(o[0], pi / 3.0, 1e-15);
    EXPECT_NEAR(o[1], pi / 9.0, 1e-15);
    EXPECT_NEAR(o[2], pi / 15.0, 1e-15);
    EXPECT_NEAR(peak_schedule(Parity::even, 1, 2.0)[0], pi / 24.0, 1e-15);
    EXPECT_THROW(peak_schedule(Parity::even, 0), ValidationError);
}

TEST(PeakSchedule, EvenPeaksDecreaseTowardsHalfHeisenberg)
{
    const int n = 400;
    double prev = 1.0;
    for (double t : peak_schedule(Parity::even, 5)) {
        const double q = qfi_pure(cubic_at(n, t)).qfi / (double(n) * n);
        EXPECT_LT(q, prev);
        EXPECT_GT(q, 0.5);
        prev = q;
    }
}

TEST(Periodicity, CubicStateRepeats)
{
    // Even N: m^3 = m mod 2 gives exp(-i 2 pi m^3) = 1 ; odd N needs 8 pi.
    const auto a = equator(12);
    EXPECT_LT(std::abs(1.0 - std::abs(cubic_at(12, 2.0 * pi).overlap(a))), 1e-10);
    const auto b = equator(13);
    EXPECT_LT(std::abs(1.0 - std::abs(cubic_at(13, 8.0 * pi).overlap(b))), 1e-10);
}

TEST(Husimi, NormalisedAndBounded)
{
    for (int n : {10, 40}) {
        const auto g = husimi(cubic_at(n, pi / 4.0), 96, 192);
        for (double v : g.values) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_NEAR(g.normalization(n), 1.0, 5e-3) << "N=" << n;
    }
}

TEST(Husimi, CssPeaksAtItsDirection)
{
    const auto g = husimi(css_state(SpinEnsemble(30), CssParams(0.5 * pi, 0.0)), 65, 128);
    const auto peaks = g.local_maxima();
    ASSERT_EQ(peaks.size(), 1u);
    EXPECT_NEAR(peaks[0].theta, 0.5 * pi, 1e-12);
    EXPECT_NEAR(peaks[0].phi, 0.0, 1e-12);
    EXPECT_NEAR(peaks[0].value, 1.0, 1e-12);
}

TEST(Husimi, CatShowsOneLobePerComponent)
{
    const int n = 6;
    const auto state = cat_state(SpinEnsemble(200), n).state;
    const auto g = husimi(state, 65, 192);
    const auto d = decompose_cat(n, Parity::even);
    EXPECT_EQ(g.local_maxima(0.2).size(), d.components.size());
}

TEST(Husimi, RejectsSmallGrid)
{
    EXPECT_THROW(husimi(equator(4), 16, 64), ValidationError);
}

TEST(ParityProbe, EvenOddDistinction)
{
    const double t = pi / 3.0;
    const auto even = sx_parity_probe(cubic_at(200, t), 10000, 1, t);
    EXPECT_EQ(even.verdict, Parity::even);
    EXPECT_NEAR(even.p_top, 1.0, 1e-10);
    const auto odd = sx_parity_probe(cubic_at(201, t), 10000, 1, t);
    EXPECT_EQ(odd.verdict, Parity::odd);
    EXPECT_LT(odd.p_top, 1e-6);
    for (int n = 10; n <= 30; ++n)
        EXPECT_EQ(sx_parity_probe(cubic_at(n, t), 100, 1, t).verdict, SpinEnsemble(n).parity()) << "N=" << n;
}

TEST(ParityProbe, LabFrameLobesOfOddCat)
{
    // GHZ lobes at phi = 7pi/12 and 19pi/12 project onto m_x = -/+ S sin(pi/12).
    const int n = 201;
    const double s = 100.5, centre = s * std::sin(pi / 12.0), width = 2.0 * std::sqrt(s);
    const auto p = sx_parity_probe(cubic_at(n, pi / 3.0), 10, 1, 0.0);
    double mass = 0.0;
    for (size_t k = 0; k < p.m_x.size(); ++k)
        if (std::abs(std::abs(p.m_x[k]) - centre) <= width) mass += p.probability[k];
    EXPECT_GE(mass, 0.9);
}

TEST(ParityProbe, LabFrameEvenStateIsTurnedCss)
{
    // m^3 = m mod 6, so the even state at pi/3 is the CSS turned by pi/3 about z
    const int n = 40;
    const auto lab = sx_parity_probe(cubic_at(n, pi / 3.0), 10, 1, 0.0);
    EXPECT_NEAR(lab.p_top, std::pow(std::cos(pi / 6.0), 2 * n), 1e-12);
}

TEST(ParityProbe, CountsSumAndDeterministic)
{
    const auto psi = cubic_at(50, 0.3);
    const auto a = sx_parity_probe(psi, 5000, 42);
    const auto b = sx_parity_probe(psi, 5000, 42);
    EXPECT_EQ(a.counts, b.counts);
    EXPECT_EQ(std::accumulate(a.counts.begin(), a.counts.end(), std::uint64_t{0}), 5000u);
    EXPECT_NEAR(std::accumulate(a.probability.begin(), a.probability.end(), 0.0), 1.0, 1e-12);
    EXPECT_NEAR(sx_parity_probe(equator(50), 10, 1).p_top, 1.0, 1e-12);
}
