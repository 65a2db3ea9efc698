#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "dicke.hpp"
#include "evolution.hpp"
#include "qfi.hpp"

namespace cubicspin {

// exp(-i pi m^3 / n) = sum_q f_q exp(-i phi_q m) on the lattice of m values of the
// given parity. Integer m: period 2n, phi_q = pi q / n. Half-integer m: period 8n,
// phi_q = pi q / (4n).
inline int fourier_period(int n, Parity parity) { return parity == Parity::even ? 2 * n : 8 * n; }

inline double fourier_phase(int q, int n, Parity parity)
{
    return 2.0 * pi * q / fourier_period(n, parity);
}

inline std::vector<Complex> fourier_coeffs(int n, Parity parity)
{
    require(n >= 1, "Fourier expansion needs n >= 1");
    const int period = fourier_period(n, parity);
    std::vector<Complex> f(period);
    // All phases are reduced exactly in integer arithmetic.
    if (parity == Parity::even) {
        const std::int64_t mod = 2 * static_cast<std::int64_t>(n);
        for (int q = 0; q < period; ++q) {
            Complex acc = 0.0;
            for (std::int64_t m = 0; m < period; ++m) {
                const std::int64_t num = ((q * m - m * m % mod * m) % mod + mod) % mod; // exponent in units of pi/n
                acc += std::polar(1.0, pi * static_cast<double>(num) / n);
            }
            f[q] = acc / static_cast<double>(period);
        }
    } else {
        // m_j = (2j+1)/2: phase pi q m_j/(4n) - pi m_j^3/n = pi (q (2j+1) - (2j+1)^3) / (8n)
        const std::int64_t mod = 16 * static_cast<std::int64_t>(n);
        for (int q = 0; q < period; ++q) {
            Complex acc = 0.0;
            for (std::int64_t j = 0; j < period; ++j) {
                const std::int64_t u = 2 * j + 1;
                const std::int64_t num = ((q * u - u * u % mod * u) % mod + mod) % mod;
                acc += std::polar(1.0, pi * static_cast<double>(num) / (8.0 * n));
            }
            f[q] = acc / static_cast<double>(period);
        }
    }
    return f;
}

enum class GhzSign { plus, minus };

inline const char* to_string(GhzSign s) { return s == GhzSign::plus ? "+" : "-"; }

// (|pi/2,phi>_m +- |pi/2,phi+pi>_m)/sqrt 2 with m-referenced CSS phases.
inline DickeVector ghz_state(const SpinEnsemble& ens, double phi, GhzSign sign = GhzSign::plus)
{
    const CVector a = equatorial_css_m(ens, phi).amplitudes();
    const CVector b = equatorial_css_m(ens, phi + pi).amplitudes();
    const double sg = sign == GhzSign::plus ? 1.0 : -1.0;
    return DickeVector(ens, (a + sg * b) / std::sqrt(2.0)).normalized();
}

struct CatComponent {
    int q = 0;
    double phi = 0.0;
    Complex amplitude; // coefficient of |pi/2,phi>_m
};

struct GhzComponent {
    double varphi = 0.0;
    GhzSign sign = GhzSign::plus;
    Complex weight;
};

struct CatDecomposition {
    int n = 0;
    Parity parity = Parity::even;
    std::vector<Complex> coeffs;
    std::vector<CatComponent> components; // |f_q| >= 1e-9
    std::vector<GhzComponent> ghz;        // pairs (q, q + period/2) merged
};

inline CatDecomposition decompose_cat(int n, Parity parity, double drop_below = 1e-9)
{
    CatDecomposition d;
    d.n = n;
    d.parity = parity;
    d.coeffs = fourier_coeffs(n, parity);
    const int period = static_cast<int>(d.coeffs.size());
    for (int q = 0; q < period; ++q)
        if (std::abs(d.coeffs[q]) >= drop_below)
            d.components.push_back({q, fourier_phase(q, n, parity), d.coeffs[q]});
    // a|phi> + b|phi+pi> = (a+b)/sqrt2 GHZ+ + (a-b)/sqrt2 GHZ-
    for (int q = 0; q < period / 2; ++q) {
        const Complex a = d.coeffs[q], b = d.coeffs[q + period / 2];
        const double phi = fourier_phase(q, n, parity);
        const Complex plus = (a + b) / std::sqrt(2.0), minus = (a - b) / std::sqrt(2.0);
        if (std::abs(plus) >= drop_below) d.ghz.push_back({phi, GhzSign::plus, plus});
        if (std::abs(minus) >= drop_below) d.ghz.push_back({phi, GhzSign::minus, minus});
    }
    return d;
}

struct CatState {
    CatDecomposition decomposition;
    DickeVector state;
};

// State at t = pi/(n chi) rebuilt as a superposition of equatorial CSS.
inline CatState cat_state(const SpinEnsemble& ens, int n)
{
    CatDecomposition d = decompose_cat(n, ens.parity());
    CVector acc = CVector::Zero(ens.dim());
    for (int q = 0; q < static_cast<int>(d.coeffs.size()); ++q) {
        if (d.coeffs[q] == Complex(0.0)) continue;
        acc += d.coeffs[q] * equatorial_css_m(ens, fourier_phase(q, n, d.parity)).amplitudes();
    }
    return {std::move(d), DickeVector(ens, std::move(acc))};
}

struct GhzProjection {
    double qfi = 0.0;
    double phi_opt = 0.0;
};

// Large-N QFI of a GHZ superposition, dropping cross terms between components:
// max over phi of 4 sum_j w_j [2S^2 + S + (2S^2 - S) cos 2(varphi_j - phi)] / 4.
inline GhzProjection ghz_projection_qfi(const std::vector<GhzComponent>& comps, int n)
{
    require(!comps.empty(), "GHZ projection needs at least one component");
    const double s = 0.5 * n;
    double total = 0.0;
    for (const auto& c : comps) total += std::norm(c.weight);
    require(total > 0.0, "GHZ component weights are all zero");
    Complex r = 0.0;
    for (const auto& c : comps) r += (std::norm(c.weight) / total) * std::polar(1.0, 2.0 * c.varphi);
    return {2.0 * s * s + s + (2.0 * s * s - s) * std::abs(r), 0.5 * std::arg(r)};
}

// Even N: t_k = pi/(12 k chi). Odd N: t_k = pi/(3(2k-1) chi).
inline std::vector<double> peak_schedule(Parity parity, int k_max, double chi = 1.0)
{
    require(k_max >= 1, "peak schedule needs k_max >= 1");
    std::vector<double> t;
    for (int k = 1; k <= k_max; ++k)
        t.push_back(parity == Parity::even ? pi / (12.0 * k * chi) : pi / (3.0 * (2 * k - 1) * chi));
    return t;
}

struct HusimiGrid {
    std::vector<double> thetas; // [0, pi] inclusive
    std::vector<double> phis;   // [0, 2pi) exclusive
    std::vector<double> values; // row-major [theta][phi]

    double at(size_t i, size_t j) const { return values[i * phis.size() + j]; }

    double max() const { return *std::max_element(values.begin(), values.end()); }

    // (N+1)/(4 pi) times the surface integral; 1 for any unit state.
    double normalization(int n) const
    {
        const size_t nt = thetas.size(), np = phis.size();
        const double dth = thetas[1] - thetas[0];
        const double dph = 2.0 * pi / np;
        double acc = 0.0;
        for (size_t i = 0; i < nt; ++i) {
            const double w = (i == 0 || i + 1 == nt) ? 0.5 : 1.0;
            double row = 0.0;
            for (size_t j = 0; j < np; ++j) row += at(i, j);
            acc += w * std::sin(thetas[i]) * row;
        }
        return (n + 1) / (4.0 * pi) * acc * dth * dph;
    }

    struct Peak {
        double theta, phi, value;
    };

    // Grid-local maxima (8-neighbourhood, periodic in phi) above rel_threshold * max.
    std::vector<Peak> local_maxima(double rel_threshold = 0.5) const
    {
        std::vector<Peak> out;
        const size_t nt = thetas.size(), np = phis.size();
        const double cut = rel_threshold * max();
        for (size_t i = 0; i < nt; ++i)
            for (size_t j = 0; j < np; ++j) {
                const double v = at(i, j);
                if (v < cut) continue;
                bool is_max = true;
                for (int di = -1; di <= 1 && is_max; ++di)
                    for (int dj = -1; dj <= 1; ++dj) {
                        if (di == 0 && dj == 0) continue;
                        const long ii = static_cast<long>(i) + di;
                        if (ii < 0 || ii >= static_cast<long>(nt)) continue;
                        const size_t jj = (j + np + dj) % np;
                        const double w = at(static_cast<size_t>(ii), jj);
                        // ties broken towards the lower index so plateaus yield one peak
                        if (w > v || (w == v && (ii < static_cast<long>(i) || (ii == static_cast<long>(i) && jj < j)))) {
                            is_max = false;
                            break;
                        }
                    }
                if (is_max) out.push_back({thetas[i], phis[j], v});
            }
        return out;
    }
};

inline HusimiGrid husimi(const DickeVector& state, int n_theta, int n_phi)
{
    require(n_theta >= 32 && n_phi >= 64, "Husimi grid must be at least 32x64");
    const SpinEnsemble& ens = state.ensemble();
    HusimiGrid g;
    g.thetas.resize(n_theta);
    g.phis.resize(n_phi);
    for (int i = 0; i < n_theta; ++i) g.thetas[i] = pi * i / (n_theta - 1);
    for (int j = 0; j < n_phi; ++j) g.phis[j] = 2.0 * pi * j / n_phi;
    g.values.assign(static_cast<size_t>(n_theta) * n_phi, 0.0);
    const CVector& psi = state.amplitudes();
    for (int i = 0; i < n_theta; ++i) {
        const RVector mag = css_magnitudes(ens.n_spins(), g.thetas[i]);
        for (int j = 0; j < n_phi; ++j) {
            // <theta,phi|psi> = sum_k mag_k e^{-i k phi} psi_k, Horner in e^{-i phi}
            const Complex z = std::polar(1.0, -g.phis[j]);
            Complex acc = 0.0;
            for (int k = ens.n_spins(); k >= 0; --k) acc = acc * z + mag[k] * psi[k];
            g.values[static_cast<size_t>(i) * n_phi + j] = std::min(1.0, std::norm(acc));
        }
    }
    return g;
}

struct ParityProbe {
    std::vector<double> m_x;           // S, S-1, ..., -S
    std::vector<double> probability;   // P(m_x)
    std::vector<std::uint64_t> counts; // sampled histogram
    double p_top = 0.0;                // P(m_x = S)
    Parity verdict = Parity::even;
};

// exp(i frame_angle Sz) is applied before the readout. Passing chi t removes the
// linear part of the cubic phase; at t = pi/(3 chi) that is the whole phase for even N
// (m^3 = m mod 6), which is what makes P(m_x = S) = 1 there. 0 is the lab frame.
// Distribution of Sx outcomes: exp(i pi/2 Sy) maps Sx onto Sz.
inline ParityProbe sx_parity_probe(const DickeVector& state, std::uint64_t samples, std::uint64_t seed,
                                   double frame_angle = 0.0)
{
    const SpinEnsemble& ens = state.ensemble();
    const Rotator rot(ens);
    const CVector r = rot.apply(rot.apply(state.amplitudes(), Axis::z, frame_angle), Axis::y, 0.5 * pi);
    ParityProbe p;
    for (int k = 0; k < ens.dim(); ++k) {
        p.m_x.push_back(ens.m(k));
        p.probability.push_back(std::norm(r[k]));
    }
    double total = 0.0;
    for (double v : p.probability) total += v;
    for (double& v : p.probability) v /= total;
    p.p_top = p.probability[0];
    p.verdict = p.p_top > 0.5 ? Parity::even : Parity::odd;
    p.counts.assign(ens.dim(), 0);
    std::mt19937_64 rng(seed);
    std::discrete_distribution<int> dist(p.probability.begin(), p.probability.end());
    for (std::uint64_t i = 0; i < samples; ++i) ++p.counts[dist(rng)];
    return p;
}

} // namespace cubicspin
