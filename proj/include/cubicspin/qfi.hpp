#pragma once

#include <array>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "dicke.hpp"
#include "evolution.hpp"

namespace cubicspin {

enum class Scheme { cubic, oat };

inline const char* to_string(Scheme s) { return s == Scheme::cubic ? "cubic" : "oat"; }

inline ZDiagonalHamiltonian scheme_hamiltonian(Scheme s, double chi = 1.0)
{
    return s == Scheme::cubic ? ZDiagonalHamiltonian::cubic(chi) : ZDiagonalHamiltonian::oat(chi);
}

struct QfiReport {
    double qfi = 0.0;
    Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();
    double phase_bound = std::numeric_limits<double>::infinity();
};

inline double cramer_rao(double qfi)
{
    require(qfi > 0.0, "Cramer-Rao bound needs a positive QFI");
    return 1.0 / std::sqrt(qfi);
}

inline QfiReport make_report(const Eigen::Matrix3d& m, double scale)
{
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(0.5 * (m + m.transpose()));
    QfiReport r;
    r.qfi = std::max(0.0, scale * es.eigenvalues()[2]);
    r.direction = es.eigenvectors().col(2);
    r.phase_bound = r.qfi > 0.0 ? 1.0 / std::sqrt(r.qfi) : std::numeric_limits<double>::infinity();
    return r;
}

// First and second moments of (Sx, Sy, Sz) from banded products, O(N).
struct SpinMoments {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Matrix3d second = Eigen::Matrix3d::Zero(); // Re<S_i S_j> = <{S_i,S_j}>/2

    Eigen::Matrix3d covariance() const { return second - mean * mean.transpose(); }
};

inline SpinMoments spin_moments(const DickeVector& state)
{
    const CVector& v = state.amplitudes();
    const CVector a = apply_splus(v);
    const CVector b = apply_sminus(v);
    const std::array<CVector, 3> sv{0.5 * (a + b), (a - b) / (2.0 * I), apply_sz(v)};
    SpinMoments mo;
    for (int i = 0; i < 3; ++i) {
        mo.mean[i] = v.dot(sv[i]).real();
        for (int j = i; j < 3; ++j) {
            mo.second(i, j) = sv[i].dot(sv[j]).real();
            mo.second(j, i) = mo.second(i, j);
        }
    }
    return mo;
}

// (Delta S_phi)^2 for S_phi = cos(phi) Sx + sin(phi) Sy.
inline double variance_along(const DickeVector& state, double phi)
{
    const Eigen::Vector3d n(std::cos(phi), std::sin(phi), 0.0);
    return n.dot(spin_moments(state).covariance() * n);
}

inline QfiReport qfi_pure(const DickeVector& state)
{
    return make_report(spin_moments(state).covariance(), 4.0);
}

struct MixedQfiOptions {
    double trace_tol = 1e-9;
    double hermitian_tol = 1e-9;
    double psd_floor = -1e-10;
    double pair_cutoff = 1e-12; // relative to the total trace
};

// Adds weight * 2 sum (l-l')^2/(l+l') Re(<l|S_i|l'><l'|S_j|l>) for one Hermitian block
// to m. Returns the smallest eigenvalue of the block.
inline double accumulate_qfi_matrix(const CMatrix& rho, const std::array<const CMatrix*, 3>& ops, double weight,
                                    double abs_cutoff, Eigen::Matrix3d& m)
{
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (rho + rho.adjoint()));
    if (es.info() != Eigen::Success) throw NumericError("density-matrix eigendecomposition failed");
    const RVector& lam = es.eigenvalues();
    const CMatrix& vec = es.eigenvectors();
    std::array<CMatrix, 3> a;
    for (int i = 0; i < 3; ++i) a[i] = vec.adjoint() * (*ops[i]) * vec;
    const Eigen::Index d = lam.size();
    RMatrix w = RMatrix::Zero(d, d);
    for (Eigen::Index l = 0; l < d; ++l)
        for (Eigen::Index lp = 0; lp < d; ++lp) {
            const double sum = lam[l] + lam[lp];
            if (sum < abs_cutoff) continue;
            const double diff = lam[l] - lam[lp];
            w(l, lp) = diff * diff / sum;
        }
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) {
            double acc = 0.0;
            for (Eigen::Index l = 0; l < d; ++l)
                for (Eigen::Index lp = 0; lp < d; ++lp)
                    if (w(l, lp) != 0.0) acc += w(l, lp) * (a[i](l, lp) * a[j](lp, l)).real();
            m(i, j) += 2.0 * weight * acc;
            if (i != j) m(j, i) += 2.0 * weight * acc;
        }
    return d ? lam[0] : 0.0;
}

inline void check_density_matrix(const CMatrix& rho, const MixedQfiOptions& opt)
{
    require(rho.rows() == rho.cols() && rho.rows() > 0, "density matrix must be square and non-empty");
    const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    require(herm <= opt.hermitian_tol, "density matrix is not Hermitian");
    const double tr = rho.trace().real();
    require(std::abs(tr - 1.0) <= opt.trace_tol, "density matrix trace " + std::to_string(tr) + " != 1");
}

// QFI matrix of rho for generators (ops[0], ops[1], ops[2]).
inline QfiReport qfi_mixed(const CMatrix& rho, const CMatrix& sx, const CMatrix& sy, const CMatrix& sz,
                           const MixedQfiOptions& opt = {})
{
    check_density_matrix(rho, opt);
    require(sx.rows() == rho.rows() && sy.rows() == rho.rows() && sz.rows() == rho.rows(),
            "generator dimension does not match the density matrix");
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    const double min_eig = accumulate_qfi_matrix(rho, {&sx, &sy, &sz}, 1.0, opt.pair_cutoff, m);
    if (min_eig < opt.psd_floor)
        throw NumericError("density matrix is not positive semidefinite (min eigenvalue " +
                           std::to_string(min_eig) + ")");
    return make_report(m, 1.0);
}

// Density matrix on the symmetric (Dicke) sector.
inline QfiReport qfi_mixed(const CMatrix& rho, const MixedQfiOptions& opt = {})
{
    const SpinMatrices s = spin_matrices(static_cast<int>(rho.rows()) - 1);
    return qfi_mixed(rho, s.sx, s.sy, s.sz, opt);
}

// Closed-form moments of the cubic-evolved equatorial CSS in the Gaussian
// (weak-coupling) approximation.
struct AnalyticMoments {
    double s = 0.0;
    double mu = 0.0;
    Complex mean_sp, mean_sp2, mean_spsm;
    std::array<double, 4> alpha{}; // alpha[k-1] = 1/sqrt(1 + k S^2 mu^2)
    double mean_sx = 0.0, mean_sy = 0.0, mean_sx2 = 0.0, mean_sy2 = 0.0, mean_anticomm_xy = 0.0;
    double a = 0.0, b = 0.0, delta_angle = 0.0;
    bool valid = true; // mu S <= 1

    double variance(double phi) const
    {
        const double a1 = alpha[0];
        return 0.25 * s * (2.0 * (1.0 - a1) * s + 1.0) +
               std::hypot(a, b) * std::cos(2.0 * phi - 2.0 * delta_angle);
    }

    double qfi() const { return 4.0 * std::hypot(a, b) + s * (2.0 * (1.0 - alpha[0]) * s + 1.0); }
};

inline AnalyticMoments analytic_moments(int n, double chi_t)
{
    require(n >= 1, "N must be positive");
    AnalyticMoments am;
    const double s = 0.5 * n;
    const double mu = 3.0 * chi_t;
    am.s = s;
    am.mu = mu;
    am.mean_sp = s / std::sqrt(Complex(1.0, -mu * s));
    am.mean_sp2 = s * (s - 0.5) / std::sqrt(Complex(1.0, -2.0 * mu * s));
    am.mean_spsm = s * s + 0.5 * s;
    for (int k = 1; k <= 4; ++k) am.alpha[k - 1] = 1.0 / std::sqrt(1.0 + k * s * s * mu * mu);
    const double a1 = am.alpha[0], a4 = am.alpha[3];
    am.mean_sx = s * std::sqrt(a1 * (a1 + 1.0) / 2.0);
    am.mean_sy = s * std::sqrt(a1 * (1.0 - a1) / 2.0);
    am.mean_sx2 = 0.25 * s * ((2.0 * s + 1.0) + (2.0 * s - 1.0) * std::sqrt(a4 * (a4 + 1.0) / 2.0));
    am.mean_sy2 = 0.25 * s * ((2.0 * s + 1.0) - (2.0 * s - 1.0) * std::sqrt(a4 * (1.0 - a4) / 2.0));
    am.mean_anticomm_xy = 0.5 * s * (2.0 * s - 1.0) * std::sqrt(a4 * (1.0 - a4) / 2.0);
    const double pref = s / (4.0 * std::sqrt(2.0)) * (2.0 * s - 1.0);
    am.a = pref * std::sqrt(a4 * (1.0 + a4)) - 0.5 * s * s * a1 * a1;
    am.b = pref * std::sqrt(a4 * (1.0 - a4)) - 0.5 * mu * s * s * s * a1 * a1;
    am.delta_angle = 0.5 * std::atan2(am.b, am.a);
    am.valid = mu * s <= 1.0;
    return am;
}

inline double analytic_weak_qfi(int n, double chi_t) { return analytic_moments(n, chi_t).qfi(); }

// Leading small-alpha behaviour, alpha = N chi t.
inline double weak_limit_qfi(int n, double alpha, Scheme scheme)
{
    const double s = 0.5 * n;
    return scheme == Scheme::cubic ? 2.0 * s + 4.5 * s * s * alpha * alpha : 2.0 * s + 2.0 * s * alpha * alpha;
}

struct PeakQfi {
    double value = 0.0;         // closed form at phi = pi/8
    double large_n_limit = 0.0; // (1 + 1/sqrt 2) N^2 / 2
    double phi = pi / 8.0;
};

inline PeakQfi peak_even_max_qfi(int n)
{
    require(n >= 2 && n % 2 == 0, "peak-I closed form holds for even N only");
    const double s = 0.5 * n;
    const double r2 = std::sqrt(2.0);
    PeakQfi p;
    p.value = 2.0 * s * s *
                  (1.0 + 1.0 / r2 -
                   std::pow(std::cos(pi / 8.0), 4.0 * s - 2.0) * (1.0 + std::cos(0.5 * pi * s))) +
              (1.0 - 1.0 / r2) * s;
    p.large_n_limit = 0.5 * (1.0 + 1.0 / r2) * n * static_cast<double>(n);
    return p;
}

// max_m |P_{2S-1}(m) - exp(-(m-S)^2/S)/sqrt(S pi)| over m = 0..2S-1.
inline double gaussian_binomial_check(double s)
{
    require(s >= 10.0, "Gaussian check needs S >= 10");
    const double two_s = 2.0 * s;
    require(std::abs(two_s - std::round(two_s)) < 1e-12, "S must be a multiple of 1/2");
    const int n = static_cast<int>(std::lround(two_s)) - 1;
    const std::vector<double> lb = log_binomials(n);
    double worst = 0.0;
    for (int m = 0; m <= n; ++m) {
        const double p = std::exp(lb[m] - n * std::log(2.0));
        const double g = std::exp(-(m - s) * (m - s) / s) / std::sqrt(s * pi);
        worst = std::max(worst, std::abs(p - g));
    }
    return worst;
}

} // namespace cubicspin
