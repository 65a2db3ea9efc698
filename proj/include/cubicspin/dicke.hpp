#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace cubicspin {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double pi = std::numbers::pi;
inline constexpr Complex I{0.0, 1.0};

enum class Parity { even, odd };

inline const char* to_string(Parity p) { return p == Parity::even ? "even" : "odd"; }

// N two-level atoms; the symmetric sector has total spin S = N/2.
// Basis index k = 0..N corresponds to m = S - k. Magnetic numbers are
// handled as integers 2m so that odd N never rounds.
class SpinEnsemble {
public:
    explicit SpinEnsemble(int n_spins) : n_(n_spins)
    {
        require(n_spins >= 1, "ensemble needs at least one spin, got N=" + std::to_string(n_spins));
    }

    int n_spins() const { return n_; }
    int two_s() const { return n_; }
    double total_spin() const { return 0.5 * n_; }
    int dim() const { return n_ + 1; }
    Parity parity() const { return n_ % 2 == 0 ? Parity::even : Parity::odd; }

    int two_m(int k) const { return n_ - 2 * k; }
    double m(int k) const { return 0.5 * two_m(k); }

    bool operator==(const SpinEnsemble&) const = default;

private:
    int n_;
};

// <m+1|S+|m> for the basis vector at index k (m = S-k), k = 1..N.
// Equals sqrt(S(S+1) - m(m+1)) = sqrt(k(N-k+1)); the radicand is an integer.
inline double ladder(int n, int k)
{
    return std::sqrt(static_cast<double>(k) * static_cast<double>(n - k + 1));
}

inline CVector apply_splus(const CVector& v)
{
    const int n = static_cast<int>(v.size()) - 1;
    CVector out = CVector::Zero(v.size());
    for (int k = 1; k <= n; ++k) out[k - 1] = ladder(n, k) * v[k];
    return out;
}

inline CVector apply_sminus(const CVector& v)
{
    const int n = static_cast<int>(v.size()) - 1;
    CVector out = CVector::Zero(v.size());
    for (int k = 1; k <= n; ++k) out[k] = ladder(n, k) * v[k - 1];
    return out;
}

inline CVector apply_sz(const CVector& v)
{
    const int n = static_cast<int>(v.size()) - 1;
    CVector out(v.size());
    for (int k = 0; k <= n; ++k) out[k] = 0.5 * (n - 2 * k) * v[k];
    return out;
}

class DickeVector {
public:
    DickeVector(SpinEnsemble ensemble, CVector amplitudes)
        : ens_(ensemble), amp_(std::move(amplitudes))
    {
        require(amp_.size() == ens_.dim(),
                "amplitude vector has length " + std::to_string(amp_.size()) + ", expected " +
                    std::to_string(ens_.dim()));
    }

    const SpinEnsemble& ensemble() const { return ens_; }
    const CVector& amplitudes() const { return amp_; }
    Complex operator[](int k) const { return amp_[k]; }
    int dim() const { return ens_.dim(); }

    double norm() const { return amp_.norm(); }

    DickeVector normalized() const
    {
        const double nrm = norm();
        if (!(nrm > 0.0)) throw NumericError("cannot normalize a zero state");
        return DickeVector(ens_, amp_ / nrm);
    }

    // <this|other>
    Complex overlap(const DickeVector& other) const
    {
        require(ens_ == other.ens_, "overlap between states of different ensembles");
        return amp_.dot(other.amp_);
    }

private:
    SpinEnsemble ens_;
    CVector amp_;
};

enum class Structure { diagonal, banded, dense };

class CollectiveOperator {
public:
    CollectiveOperator(SpinEnsemble ensemble, CMatrix matrix, Structure structure = Structure::dense)
        : ens_(ensemble), mat_(std::move(matrix)), structure_(structure)
    {
        require(mat_.rows() == ens_.dim() && mat_.cols() == ens_.dim(),
                "operator must be " + std::to_string(ens_.dim()) + "x" + std::to_string(ens_.dim()));
    }

    const SpinEnsemble& ensemble() const { return ens_; }
    const CMatrix& matrix() const { return mat_; }
    Structure structure() const { return structure_; }

    double hermiticity_defect() const { return (mat_ - mat_.adjoint()).cwiseAbs().maxCoeff(); }

private:
    SpinEnsemble ens_;
    CMatrix mat_;
    Structure structure_;
};

// Spin-j matrices (dimension 2j+1, basis m = j..-j).
struct SpinMatrices {
    CMatrix sx, sy, sz, splus, sminus;
};

inline SpinMatrices spin_matrices(int two_j)
{
    require(two_j >= 0, "spin must be non-negative");
    const int d = two_j + 1;
    SpinMatrices s;
    s.splus = CMatrix::Zero(d, d);
    s.sz = CMatrix::Zero(d, d);
    for (int k = 0; k < d; ++k) {
        s.sz(k, k) = 0.5 * (two_j - 2 * k);
        if (k >= 1) s.splus(k - 1, k) = ladder(two_j, k);
    }
    s.sminus = s.splus.adjoint();
    s.sx = 0.5 * (s.splus + s.sminus);
    s.sy = (s.splus - s.sminus) / (2.0 * I);
    return s;
}

struct CollectiveOps {
    CollectiveOperator sx, sy, sz, splus, sminus;
};

inline CollectiveOps build_collective_ops(const SpinEnsemble& ens)
{
    SpinMatrices s = spin_matrices(ens.two_s());
    return CollectiveOps{
        CollectiveOperator(ens, std::move(s.sx), Structure::banded),
        CollectiveOperator(ens, std::move(s.sy), Structure::banded),
        CollectiveOperator(ens, std::move(s.sz), Structure::diagonal),
        CollectiveOperator(ens, std::move(s.splus), Structure::banded),
        CollectiveOperator(ens, std::move(s.sminus), Structure::banded),
    };
}

struct CssParams {
    double theta;
    double phi;

    CssParams(double theta_, double phi_) : theta(theta_), phi(phi_)
    {
        require(std::isfinite(theta) && std::isfinite(phi), "CSS angles must be finite");
        require(theta >= -1e-12 && theta <= pi + 1e-12, "CSS polar angle must lie in [0, pi]");
    }
};

// ln C(n, k) for k = 0..n. Plain double recurrence up to n = 300 (C(300,150) ~ 1e89
// is still representable), cumulative log sums above that.
inline std::vector<double> log_binomials(int n)
{
    std::vector<double> out(n + 1, 0.0);
    if (n <= 300) {
        double c = 1.0;
        for (int k = 1; k <= n; ++k) {
            c = c * (n - k + 1) / k;
            out[k] = std::log(c);
        }
    } else {
        for (int k = 1; k <= n; ++k)
            out[k] = out[k - 1] + std::log(static_cast<double>(n - k + 1) / k);
    }
    return out;
}

// |amplitude| of the CSS at polar angle theta: sqrt(C(N,k)) cos(theta/2)^(N-k) sin(theta/2)^k.
inline RVector css_magnitudes(int n, double theta)
{
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    RVector mag(n + 1);
    if (n <= 300) {
        double binom = 1.0;
        for (int k = 0; k <= n; ++k) {
            if (k > 0) binom = binom * (n - k + 1) / k;
            mag[k] = std::sqrt(binom) * std::pow(c, n - k) * std::pow(s, k);
        }
    } else {
        const std::vector<double> lb = log_binomials(n);
        const double lc = std::log(std::abs(c));
        const double ls = std::log(std::abs(s));
        for (int k = 0; k <= n; ++k) {
            double e = 0.5 * lb[k];
            if (n - k > 0) e += (n - k) * lc;
            if (k > 0) e += k * ls;
            mag[k] = std::exp(e);
        }
    }
    return mag / mag.norm();
}

// Product state with every atom in cos(theta/2)|up> + e^{i phi} sin(theta/2)|down>.
// The k = 0 amplitude is real and non-negative.
inline DickeVector css_state(const SpinEnsemble& ens, const CssParams& p)
{
    const RVector mag = css_magnitudes(ens.n_spins(), p.theta);
    CVector amp(ens.dim());
    for (int k = 0; k < ens.dim(); ++k) amp[k] = mag[k] * std::polar(1.0, k * p.phi);
    return DickeVector(ens, std::move(amp));
}

// Equatorial CSS with the phase referenced to m instead of k: amplitudes carry
// e^{-i m phi}, i.e. e^{-i S phi} times css_state(pi/2, phi).
inline DickeVector equatorial_css_m(const SpinEnsemble& ens, double phi)
{
    const RVector mag = css_magnitudes(ens.n_spins(), 0.5 * pi);
    CVector amp(ens.dim());
    for (int k = 0; k < ens.dim(); ++k) amp[k] = mag[k] * std::polar(1.0, -0.5 * ens.two_m(k) * phi);
    return DickeVector(ens, std::move(amp));
}

inline Complex expectation(const DickeVector& state, const CollectiveOperator& op)
{
    require(state.ensemble() == op.ensemble(),
            "state and operator belong to different ensembles (N=" +
                std::to_string(state.ensemble().n_spins()) + " vs N=" +
                std::to_string(op.ensemble().n_spins()) + ")");
    return state.amplitudes().dot(op.matrix() * state.amplitudes());
}

// Matrix elements <pi/2,phi1| O |pi/2,phi2> between two equatorial CSS. The oracle
// values come from exact banded arithmetic; the closed_* members evaluate the
// textbook closed forms so the two can be compared.
struct CssCrossElements {
    double s = 0.0;
    double phi1 = 0.0;
    double phi2 = 0.0;

    Complex overlap;
    Complex sp, sm;   // S+ and S-
    Complex sp2, sm2; // S+^2 and S-^2
    Complex pm, mp;   // S+S- and S-S+

    Complex s_phi(double phi) const
    {
        return 0.5 * std::polar(1.0, -phi) * sp + 0.5 * std::polar(1.0, phi) * sm;
    }

    double dphi() const { return phi2 - phi1; }

    Complex closed_s_phi(double phi) const
    {
        const double d = dphi();
        return 0.5 * s * std::pow(std::cos(0.5 * d), 2.0 * s - 1.0) *
               std::cos(0.5 * d + phi1 - phi) * std::polar(1.0, s * d);
    }

    Complex closed_sp2() const
    {
        const double d = dphi();
        return 0.25 * s * (2.0 * s - 1.0) * std::pow(std::cos(0.5 * d), 2.0 * s - 2.0) *
               std::polar(1.0, d * (s + 1.0) + 2.0 * phi1);
    }

    Complex closed_sm2() const
    {
        const double d = dphi();
        return 0.25 * s * (2.0 * s - 1.0) * std::pow(std::cos(0.5 * d), 2.0 * s - 2.0) *
               std::polar(1.0, d * (s - 1.0) - 2.0 * phi1);
    }

    Complex closed_pm() const
    {
        const double d = dphi();
        const Complex bracket = 0.5 * s * std::polar(1.0, -0.5 * d) * std::cos(0.5 * d) +
                                0.25 * s * (2.0 * s - 1.0);
        return std::pow(std::cos(0.5 * d), 2.0 * s - 2.0) * bracket * std::polar(1.0, d * s);
    }

    // True when the closed form differs from the oracle by more than rel_tol
    // relative to the scale S^2 of the second moments.
    static bool discrepant(Complex oracle, Complex closed, double scale, double rel_tol = 1e-8)
    {
        return std::abs(oracle - closed) > rel_tol * std::max(scale, std::abs(oracle));
    }

    bool s_phi_discrepant(double phi) const { return discrepant(s_phi(phi), closed_s_phi(phi), s); }
    bool sp2_discrepant() const { return discrepant(sp2, closed_sp2(), s * s); }
    bool sm2_discrepant() const { return discrepant(sm2, closed_sm2(), s * s); }
    bool pm_discrepant() const { return discrepant(pm, closed_pm(), s * s); }
};

inline CssCrossElements css_cross_elements(const SpinEnsemble& ens, double phi1, double phi2)
{
    const CVector a = css_state(ens, CssParams(0.5 * pi, phi1)).amplitudes();
    const CVector b = css_state(ens, CssParams(0.5 * pi, phi2)).amplitudes();
    CssCrossElements out;
    out.s = ens.total_spin();
    out.phi1 = phi1;
    out.phi2 = phi2;
    const CVector pb = apply_splus(b);
    const CVector mb = apply_sminus(b);
    out.overlap = a.dot(b);
    out.sp = a.dot(pb);
    out.sm = a.dot(mb);
    out.sp2 = a.dot(apply_splus(pb));
    out.sm2 = a.dot(apply_sminus(mb));
    out.pm = a.dot(apply_splus(mb));
    out.mp = a.dot(apply_sminus(pb));
    return out;
}

} // namespace cubicspin
