#pragma once

#include <cmath>
#include <algorithm>
#include <complex>
#include <limits>
#include <vector>

#include "dicke.hpp"

namespace cubicspin {

// Atoms in a one-sided cavity driven by a detuned pulse. gamma_atom is the atomic
// linewidth (distinct from the collective dephasing rate of the master equation).
struct CavityParams {
    double g = 1.0;
    double kappa = 10.0;
    double gamma_atom = 10.0;
    double delta = 150.0;
    double n_photons = 1.0;
    int n_spins = 1000;

    CavityParams(double g_, double kappa_, double gamma_atom_, double delta_, double n_photons_, int n_spins_)
        : g(g_), kappa(kappa_), gamma_atom(gamma_atom_), delta(delta_), n_photons(n_photons_), n_spins(n_spins_)
    {
        require(std::isfinite(g) && g > 0.0, "rate must be > 0 (g)");
        require(std::isfinite(kappa) && kappa > 0.0, "rate must be > 0 (kappa)");
        require(std::isfinite(gamma_atom) && gamma_atom > 0.0, "rate must be > 0 (gamma_atom)");
        require(std::isfinite(delta) && delta > 0.0, "rate must be > 0 (delta)");
        require(std::isfinite(n_photons) && n_photons >= 0.0 && std::floor(n_photons) == n_photons,
                "photon number must be a non-negative integer");
        require(n_spins >= 1, "N must be positive");
    }

    // kappa fixed by the cooperativity eta = 4 g^2 / (kappa gamma_atom).
    static CavityParams from_cooperativity(double g, double eta, double gamma_atom, double delta, double n_photons,
                                           int n_spins)
    {
        require(std::isfinite(eta) && eta > 0.0, "cooperativity must be > 0");
        return CavityParams(g, 4.0 * g * g / (eta * gamma_atom), gamma_atom, delta, n_photons, n_spins);
    }

    double eta() const { return 4.0 * g * g / (kappa * gamma_atom); }
    double omega() const { return g * g / delta; }
    double kappa0() const { return omega() / kappa; }
    // delta must dominate g, kappa and gamma_atom by this factor
    bool detuning_ok(double factor = 10.0) const
    {
        return delta >= factor * g && delta >= factor * kappa && delta >= factor * gamma_atom;
    }
};

struct EffectiveCoupling {
    double kappa0 = 0.0;
    double mu_n = 0.0;          // 32 n kappa0^3 / 3
    double mu_n_cooperativity = 0.0; // n (eta gamma_atom / delta)^3 / 6
    double alpha_eff = 0.0;     // N mu_n
    bool regime_ok = false;     // kappa0 N < 0.1
    bool detuning_ok = false;
    double t0 = 0.0;            // 4 kappa0^2 / Omega; the pulse lasts 2 t0
    double interaction_time = 0.0;
};

inline EffectiveCoupling effective_coupling(const CavityParams& p)
{
    EffectiveCoupling e;
    const double k0 = p.kappa0();
    e.kappa0 = k0;
    e.mu_n = 32.0 * p.n_photons * k0 * k0 * k0 / 3.0;
    const double x = p.eta() * p.gamma_atom / p.delta;
    e.mu_n_cooperativity = p.n_photons * x * x * x / 6.0;
    e.alpha_eff = p.n_spins * e.mu_n;
    e.regime_ok = k0 * p.n_spins < 0.1;
    e.detuning_ok = p.detuning_ok();
    e.t0 = 4.0 * k0 * k0 / p.omega();
    e.interaction_time = 2.0 * e.t0;
    return e;
}

// Reflection phase for atomic projection m: -arctan[(kappa/2)/(kappa/2 - 2 Omega m)],
// written as atan(1 - x) - pi/2 with x = 4 kappa0 m so it stays continuous through the pole.
inline double exact_phase(double kappa0, double m)
{
    const double x = 4.0 * kappa0 * m;
    return std::atan(1.0 - x) - 0.5 * pi;
}

// Third-order expansion -(pi/4 + 2 k0 m + 4 k0^2 m^2 + 16/3 k0^3 m^3).
inline double cubic_phase(double kappa0, double m)
{
    const double k = kappa0;
    return -(0.25 * pi + 2.0 * k * m + 4.0 * k * k * m * m + 16.0 / 3.0 * k * k * k * m * m * m);
}

// Expansion coefficients in m of the non-constant phase terms.
struct PhaseCoefficients {
    double linear, quadratic, cubic;
};

inline PhaseCoefficients phase_taylor_coefficients(double kappa0)
{
    return {2.0 * kappa0, 4.0 * kappa0 * kappa0, 16.0 / 3.0 * kappa0 * kappa0 * kappa0};
}

struct PhaseExpansionError {
    double max_error = 0.0;
    double cubic_span = 0.0; // max - min of the (16/3) k0^3 m^3 term over the range
    bool pole_proximity = false; // some |1 - 4 k0 m| < 0.1
};

inline PhaseExpansionError phase_expansion_error(const CavityParams& p, const std::vector<double>& m_values)
{
    require(!m_values.empty(), "m range is empty");
    const double k0 = p.kappa0();
    PhaseExpansionError r;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double m : m_values) {
        r.max_error = std::max(r.max_error, std::abs(exact_phase(k0, m) - cubic_phase(k0, m)));
        if (std::abs(1.0 - 4.0 * k0 * m) < 0.1) r.pole_proximity = true;
        const double c = 16.0 / 3.0 * k0 * k0 * k0 * m * m * m;
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    r.cubic_span = hi - lo;
    return r;
}

// All Dicke projections m = S, S-1, ..., -S.
inline std::vector<double> dicke_m_values(int n)
{
    std::vector<double> m;
    for (int k = 0; k <= n; ++k) m.push_back(0.5 * (n - 2 * k));
    return m;
}

inline PhaseExpansionError phase_expansion_error(const CavityParams& p)
{
    return phase_expansion_error(p, dicke_m_values(p.n_spins));
}

} // namespace cubicspin
