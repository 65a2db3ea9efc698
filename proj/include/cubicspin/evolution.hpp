#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "dicke.hpp"

namespace cubicspin {

enum class Axis { x, y, z };

inline const char* to_string(Axis a) { return a == Axis::x ? "x" : a == Axis::y ? "y" : "z"; }

// H = c1 Sz + c2 Sz^2 + c3 Sz^3 in units of chi.
struct ZDiagonalHamiltonian {
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;

    ZDiagonalHamiltonian() = default;
    ZDiagonalHamiltonian(double c1_, double c2_, double c3_) : c1(c1_), c2(c2_), c3(c3_)
    {
        require(std::isfinite(c1) && std::isfinite(c2) && std::isfinite(c3),
                "Hamiltonian coefficients must be finite");
    }

    static ZDiagonalHamiltonian cubic(double chi = 1.0) { return {0.0, 0.0, chi}; }
    static ZDiagonalHamiltonian oat(double chi = 1.0) { return {0.0, chi, 0.0}; }

    double energy(double m) const { return ((c3 * m + c2) * m + c1) * m; }
};

inline DickeVector evolve_zdiag(const DickeVector& state, const ZDiagonalHamiltonian& h, double t)
{
    const SpinEnsemble& ens = state.ensemble();
    CVector out(ens.dim());
    for (int k = 0; k < ens.dim(); ++k)
        out[k] = std::polar(1.0, -t * h.energy(ens.m(k))) * state[k];
    return DickeVector(ens, std::move(out));
}

// exp(-iHt) through a single Hermitian eigendecomposition, reusable over many t.
class HermitianPropagator {
public:
    explicit HermitianPropagator(const CMatrix& h, double hermitian_tol = 1e-10)
    {
        require(h.rows() == h.cols(), "Hamiltonian must be square");
        const double defect = h.rows() ? (h - h.adjoint()).cwiseAbs().maxCoeff() : 0.0;
        require(defect <= hermitian_tol,
                "Hamiltonian is not Hermitian (max |H - H^dag| = " + std::to_string(defect) + ")");
        Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (h + h.adjoint()));
        if (es.info() != Eigen::Success) throw NumericError("Hermitian eigendecomposition failed");
        evals_ = es.eigenvalues();
        evecs_ = es.eigenvectors();
    }

    explicit HermitianPropagator(const CollectiveOperator& h, double hermitian_tol = 1e-10)
        : HermitianPropagator(h.matrix(), hermitian_tol)
    {
    }

    const RVector& eigenvalues() const { return evals_; }
    const CMatrix& eigenvectors() const { return evecs_; }

    // Coordinates of v in the eigenbasis; feed them to at() for every time on a grid.
    CVector project(const CVector& v) const { return evecs_.adjoint() * v; }

    CVector at(const CVector& coeffs, double t) const
    {
        CVector phased(coeffs.size());
        for (Eigen::Index i = 0; i < coeffs.size(); ++i)
            phased[i] = std::polar(1.0, -evals_[i] * t) * coeffs[i];
        return evecs_ * phased;
    }

    CVector apply(const CVector& v, double t) const { return at(project(v), t); }

    DickeVector apply(const DickeVector& state, double t) const
    {
        return DickeVector(state.ensemble(), apply(state.amplitudes(), t));
    }

    CMatrix unitary(double t) const
    {
        CMatrix phased = evecs_;
        for (Eigen::Index i = 0; i < evals_.size(); ++i) phased.col(i) *= std::polar(1.0, -evals_[i] * t);
        return phased * evecs_.adjoint();
    }

private:
    RVector evals_;
    CMatrix evecs_;
};

inline DickeVector evolve_hermitian(const DickeVector& state, const CollectiveOperator& h, double t)
{
    require(state.ensemble() == h.ensemble(), "state and Hamiltonian belong to different ensembles");
    return HermitianPropagator(h).apply(state, t);
}

// Applies exp(i angle S_q). Sx is real tridiagonal, so its real eigensystem is
// computed once; Sy = Rz Sx Rz^dag with Rz = exp(-i pi/2 Sz).
class Rotator {
public:
    explicit Rotator(const SpinEnsemble& ens) : ens_(ens)
    {
        const int n = ens.n_spins();
        RMatrix sx = RMatrix::Zero(ens.dim(), ens.dim());
        for (int k = 1; k <= n; ++k) {
            sx(k - 1, k) = 0.5 * ladder(n, k);
            sx(k, k - 1) = 0.5 * ladder(n, k);
        }
        Eigen::SelfAdjointEigenSolver<RMatrix> es(sx);
        if (es.info() != Eigen::Success) throw NumericError("Sx eigendecomposition failed");
        evals_ = es.eigenvalues();
        evecs_ = es.eigenvectors();
    }

    CVector apply(const CVector& v, Axis axis, double angle) const
    {
        require(v.size() == ens_.dim(), "rotation applied to a vector of the wrong dimension");
        switch (axis) {
        case Axis::z: {
            CVector out(v.size());
            for (int k = 0; k < ens_.dim(); ++k) out[k] = std::polar(1.0, angle * ens_.m(k)) * v[k];
            return out;
        }
        case Axis::x:
            return exp_sx(v, angle);
        case Axis::y: {
            CVector w(v.size());
            for (int k = 0; k < ens_.dim(); ++k) w[k] = std::polar(1.0, 0.5 * pi * ens_.m(k)) * v[k];
            w = exp_sx(w, angle);
            for (int k = 0; k < ens_.dim(); ++k) w[k] *= std::polar(1.0, -0.5 * pi * ens_.m(k));
            return w;
        }
        }
        return v;
    }

    DickeVector apply(const DickeVector& state, Axis axis, double angle) const
    {
        require(state.ensemble() == ens_, "rotation built for a different ensemble");
        return DickeVector(ens_, apply(state.amplitudes(), axis, angle));
    }

private:
    CVector exp_sx(const CVector& v, double angle) const
    {
        CVector c = evecs_.transpose().cast<Complex>() * v;
        for (Eigen::Index i = 0; i < c.size(); ++i) c[i] *= std::polar(1.0, angle * evals_[i]);
        return evecs_.cast<Complex>() * c;
    }

    SpinEnsemble ens_;
    RVector evals_;
    RMatrix evecs_;
};

inline DickeVector rotate(const DickeVector& state, Axis axis, double angle)
{
    if (axis == Axis::z) return evolve_zdiag(state, ZDiagonalHamiltonian(-angle, 0.0, 0.0), 1.0);
    return Rotator(state.ensemble()).apply(state, axis, angle);
}

// ||A - e^{i theta} B||_2 minimised over the global phase theta.
inline double phase_aligned_distance(const CMatrix& a, const CMatrix& b)
{
    require(a.rows() == b.rows() && a.cols() == b.cols(), "operator distance needs equal shapes");
    auto dist = [&](double theta) {
        Eigen::JacobiSVD<CMatrix> svd(a - std::polar(1.0, theta) * b);
        return svd.singularValues()[0];
    };
    const Complex ip = (b.adjoint() * a).trace();
    const double theta0 = std::abs(ip) > 0 ? std::arg(ip) : 0.0;
    const double d0 = dist(theta0);
    if (d0 == 0.0) return 0.0;
    // Any better phase lies within |theta - theta0| <~ 2 d0; golden-section inside that window.
    const double w = std::min(pi, 4.0 * d0 + 1e-12);
    double lo = theta0 - w, hi = theta0 + w;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = dist(x1), f2 = dist(x2);
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        if (f1 < f2) {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - g * (hi - lo); f1 = dist(x1);
        } else {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + g * (hi - lo); f2 = dist(x2);
        }
    }
    return std::min({d0, f1, f2});
}

struct PulseStep {
    enum class Kind { rotation, oat };
    Kind kind;
    Axis axis;
    double angle; // applies exp(i angle S_axis^k), k = 1 for rotation, 2 for oat
};

using PulseSequence = std::vector<PulseStep>;

// Least-squares fit of a diagonal phase profile phase(m) = sum_j c_j m^j, j = 0..3.
struct ZPhaseFit {
    double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;
};

inline ZPhaseFit fit_z_phase(const SpinEnsemble& ens, const RVector& phase)
{
    RMatrix basis(ens.dim(), 4);
    for (int k = 0; k < ens.dim(); ++k) {
        const double m = ens.m(k);
        basis(k, 0) = 1.0;
        basis(k, 1) = m;
        basis(k, 2) = m * m;
        basis(k, 3) = m * m * m;
    }
    const Eigen::Vector4d c = basis.completeOrthogonalDecomposition().solve(phase);
    return {c[0], c[1], c[2], c[3]};
}

// Diagonal of -i log(U) for a unitary U, via its (numerically diagonal) Schur form.
inline RVector log_unitary_diagonal(const CMatrix& u)
{
    Eigen::ComplexSchur<CMatrix> schur(u);
    const CMatrix& q = schur.matrixU();
    const CMatrix& t = schur.matrixT();
    CMatrix logd = CMatrix::Zero(u.rows(), u.cols());
    for (Eigen::Index i = 0; i < u.rows(); ++i) logd(i, i) = std::arg(t(i, i));
    return (q * logd * q.adjoint()).diagonal().real();
}

struct CubicSynthesis {
    PulseSequence sequence;   // in order of application
    CMatrix composite;        // product of the four commutator composites
    CollectiveOperator effective;
    double error_to_target = 0.0;
    double linear_coefficient_fit = 0.0;     // c1 in [T_yz, T_xz] = i(c3 Sz^3 + c1 Sz)
    double linear_coefficient_printed = 0.0; // 4S^2 + 4S - 1
    double cubic_coefficient_fit = 0.0;      // c3, expected -8
    std::string warning;
};

inline CMatrix cubic_target(const SpinEnsemble& ens, double delta)
{
    CMatrix v = CMatrix::Zero(ens.dim(), ens.dim());
    const double d4 = std::pow(delta, 4);
    for (int k = 0; k < ens.dim(); ++k) {
        const double m = ens.m(k);
        v(k, k) = std::polar(1.0, -8.0 * d4 * m * m * m);
    }
    return v;
}

// Builds exp(-i 8 delta^4 Sz^3) from rotations and one-axis twists using the
// group-commutator E(A,B) = U_A(d) U_B(d) U_A(-d) U_B(-d) ~ exp(-d^2 [A,B]).
inline CubicSynthesis synthesize_cubic(const SpinEnsemble& ens, double delta)
{
    require(ens.n_spins() <= 12, "gate synthesis uses dense products and is limited to N <= 12");
    require(std::isfinite(delta), "delta must be finite");

    const SpinMatrices s = spin_matrices(ens.two_s());
    const CMatrix sx2 = s.sx * s.sx;
    const CMatrix sy2 = s.sy * s.sy;
    const HermitianPropagator px(s.sx), py(s.sy), pz(s.sz), px2(sx2), py2(sy2);

    auto prop = [&](PulseStep::Kind kind, Axis axis) -> const HermitianPropagator& {
        if (axis == Axis::z) return pz;
        if (kind == PulseStep::Kind::rotation) return axis == Axis::x ? px : py;
        return axis == Axis::x ? px2 : py2;
    };

    CubicSynthesis out{{}, CMatrix::Identity(ens.dim(), ens.dim()),
                       CollectiveOperator(ens, CMatrix::Identity(ens.dim(), ens.dim())), 0.0, 0.0, 0.0, 0.0,
                       {}};
    CMatrix u = CMatrix::Identity(ens.dim(), ens.dim());
    auto push = [&](PulseStep::Kind kind, Axis axis, double angle) {
        out.sequence.push_back({kind, axis, angle});
        u = prop(kind, axis).unitary(-angle) * u;
    };
    using K = PulseStep::Kind;
    struct Gen {
        K kind;
        Axis axis;
    };
    // E(A,B) applied as U_B(-d), U_A(-d), U_B(d), U_A(d).
    auto group_commutator = [&](Gen a, Gen b) {
        push(b.kind, b.axis, -delta);
        push(a.kind, a.axis, -delta);
        push(b.kind, b.axis, delta);
        push(a.kind, a.axis, delta);
    };
    const Gen x1{K::rotation, Axis::x}, y1{K::rotation, Axis::y};
    const Gen x2{K::oat, Axis::x}, y2{K::oat, Axis::y};
    group_commutator(x1, y2);
    group_commutator(x2, y1);
    group_commutator(y2, x1);
    group_commutator(y1, x2);
    out.composite = u;

    // Residual linear phase read off the exact commutator of the twisting tensors.
    const CMatrix txz = s.sx * s.sz + s.sz * s.sx;
    const CMatrix tyz = s.sy * s.sz + s.sz * s.sy;
    const CMatrix g = tyz * txz - txz * tyz;
    RVector gdiag(ens.dim());
    for (int k = 0; k < ens.dim(); ++k) gdiag[k] = (g(k, k) / I).real();
    RMatrix basis(ens.dim(), 2);
    for (int k = 0; k < ens.dim(); ++k) {
        const double m = ens.m(k);
        basis(k, 0) = m * m * m;
        basis(k, 1) = m;
    }
    const Eigen::Vector2d c = basis.completeOrthogonalDecomposition().solve(gdiag);
    out.cubic_coefficient_fit = c[0];
    out.linear_coefficient_fit = c[1];
    const double s_ = ens.total_spin();
    out.linear_coefficient_printed = 4.0 * s_ * s_ + 4.0 * s_ - 1.0;

    push(K::rotation, Axis::z, -out.linear_coefficient_fit * std::pow(delta, 4));
    out.effective = CollectiveOperator(ens, u);
    out.error_to_target = phase_aligned_distance(u, cubic_target(ens, delta));
    if (std::abs(delta) > 0.3) out.warning = "|delta| > 0.3: small-angle expansion invalid";
    return out;
}

// log2(e(d_i) / e(d_{i+1})) for consecutive pairs of a halving delta ladder.
inline std::vector<double> synthesis_convergence_orders(const SpinEnsemble& ens, const std::vector<double>& deltas)
{
    require(deltas.size() >= 2, "convergence order needs at least two deltas");
    std::vector<double> errs;
    for (double d : deltas) errs.push_back(synthesize_cubic(ens, d).error_to_target);
    std::vector<double> orders;
    for (size_t i = 0; i + 1 < deltas.size(); ++i)
        orders.push_back(std::log(errs[i] / errs[i + 1]) / std::log(deltas[i] / deltas[i + 1]));
    return orders;
}

} // namespace cubicspin
