#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "dicke.hpp"
#include "evolution.hpp"
#include "integrator.hpp"
#include "qfi.hpp"

namespace cubicspin {

// Decay and dephasing rates in units of chi, under D[O]rho = 2 O rho O^dag - {O^dag O, rho}.
struct LindbladParams {
    double gamma = 0.0;          // single-spin decay, summed over all spins
    double gamma_dephasing = 0.0; // collective dephasing D[Sz]

    LindbladParams() = default;
    LindbladParams(double gamma_, double dephasing) : gamma(gamma_), gamma_dephasing(dephasing)
    {
        require(std::isfinite(gamma) && gamma >= 0.0, "rate must be >= 0 (gamma)");
        require(std::isfinite(gamma_dephasing) && gamma_dephasing >= 0.0, "rate must be >= 0 (dephasing)");
    }
};

// Exact binomials for n <= 66 (C(66,33) < 2^64).
inline std::uint64_t binomial_u64(int n, int k)
{
    require(n >= 0 && n <= 66, "exact binomial limited to n <= 66");
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r / i * (n - k + i) + r % i * (n - k + i) / i;
    return r;
}

// Multiplicity of the spin-j irrep in N spin-1/2: C(N, N/2-j) - C(N, N/2-j-1).
inline std::uint64_t dicke_degeneracy(int n, int two_j)
{
    require(two_j >= 0 && two_j <= n && (n - two_j) % 2 == 0, "invalid total spin for this N");
    const int k = (n - two_j) / 2;
    return binomial_u64(n, k) - binomial_u64(n, k - 1);
}

// Geometry of the permutation-invariant block decomposition: blocks j = N/2, N/2-1, ...
struct BlockLayout {
    int n_spins = 0;
    std::vector<int> two_j;
    std::vector<int> dims;
    std::vector<Eigen::Index> offsets; // into the flattened column-major storage
    std::vector<double> degeneracy;
    Eigen::Index size = 0;

    explicit BlockLayout(int n) : n_spins(n)
    {
        require(n >= 1 && n <= 64, "block solver supports 1 <= N <= 64");
        for (int tj = n; tj >= 0; tj -= 2) {
            two_j.push_back(tj);
            dims.push_back(tj + 1);
            offsets.push_back(size);
            degeneracy.push_back(static_cast<double>(dicke_degeneracy(n, tj)));
            size += static_cast<Eigen::Index>(tj + 1) * (tj + 1);
        }
    }

    int blocks() const { return static_cast<int>(two_j.size()); }
    int index_of(int tj) const { return (n_spins - tj) / 2; }
};

class DickeBlockState {
public:
    DickeBlockState(std::shared_ptr<const BlockLayout> layout, CVector data)
        : layout_(std::move(layout)), data_(std::move(data))
    {
        require(data_.size() == layout_->size, "block data has the wrong size");
    }

    static DickeBlockState zero(int n)
    {
        auto layout = std::make_shared<const BlockLayout>(n);
        return DickeBlockState(layout, CVector::Zero(layout->size));
    }

    // Pure symmetric state placed in the j = N/2 block.
    static DickeBlockState from_pure(const DickeVector& psi)
    {
        DickeBlockState st = zero(psi.ensemble().n_spins());
        st.block(0) = psi.amplitudes() * psi.amplitudes().adjoint();
        return st;
    }

    const BlockLayout& layout() const { return *layout_; }
    std::shared_ptr<const BlockLayout> layout_ptr() const { return layout_; }
    const CVector& data() const { return data_; }
    int n_spins() const { return layout_->n_spins; }
    int blocks() const { return layout_->blocks(); }
    int two_j(int b) const { return layout_->two_j[b]; }
    double degeneracy(int b) const { return layout_->degeneracy[b]; }

    Eigen::Map<CMatrix> block(int b)
    {
        return Eigen::Map<CMatrix>(data_.data() + layout_->offsets[b], layout_->dims[b], layout_->dims[b]);
    }
    Eigen::Map<const CMatrix> block(int b) const
    {
        return Eigen::Map<const CMatrix>(data_.data() + layout_->offsets[b], layout_->dims[b], layout_->dims[b]);
    }

    double trace() const
    {
        double tr = 0.0;
        for (int b = 0; b < blocks(); ++b) tr += degeneracy(b) * block(b).trace().real();
        return tr;
    }

    double mean_sz() const
    {
        double acc = 0.0;
        for (int b = 0; b < blocks(); ++b) {
            const auto blk = block(b);
            for (int a = 0; a < layout_->dims[b]; ++a) acc += degeneracy(b) * 0.5 * (two_j(b) - 2 * a) * blk(a, a).real();
        }
        return acc;
    }

    double hermiticity_defect() const
    {
        double worst = 0.0;
        for (int b = 0; b < blocks(); ++b) worst = std::max(worst, (block(b) - block(b).adjoint()).cwiseAbs().maxCoeff());
        return worst;
    }

    double min_eigenvalue() const
    {
        double lo = std::numeric_limits<double>::infinity();
        for (int b = 0; b < blocks(); ++b) {
            Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (block(b) + block(b).adjoint()), Eigen::EigenvaluesOnly);
            lo = std::min(lo, es.eigenvalues()[0]);
        }
        return lo;
    }

    bool lower_blocks_empty(double tol = 0.0) const
    {
        for (int b = 1; b < blocks(); ++b)
            if (block(b).cwiseAbs().maxCoeff() > tol) return false;
        return true;
    }

private:
    std::shared_ptr<const BlockLayout> layout_;
    CVector data_;
};

// QFI of a block state: each block contributes degeneracy times its own QFI matrix.
inline QfiReport qfi_mixed(const DickeBlockState& rho, const MixedQfiOptions& opt = {.psd_floor = -1e-8})
{
    const double tr = rho.trace();
    require(std::abs(tr - 1.0) <= opt.trace_tol, "block state trace " + std::to_string(tr) + " != 1");
    require(rho.hermiticity_defect() <= opt.hermitian_tol, "block state is not Hermitian");
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    double min_eig = std::numeric_limits<double>::infinity();
    for (int b = 0; b < rho.blocks(); ++b) {
        const auto blk = rho.block(b);
        if (blk.cwiseAbs().maxCoeff() == 0.0) continue;
        const SpinMatrices s = spin_matrices(rho.two_j(b));
        min_eig = std::min(min_eig, accumulate_qfi_matrix(blk, {&s.sx, &s.sy, &s.sz}, rho.degeneracy(b),
                                                          opt.pair_cutoff * tr, m));
    }
    if (min_eig < opt.psd_floor)
        throw NumericError("block state is not positive semidefinite (min eigenvalue " + std::to_string(min_eig) + ")");
    return make_report(m, 1.0);
}

// Hamiltonians usable by the block solver. A generator written in terms of the
// collective spin operators acts on every block through that block's spin
// matrices; a bare matrix on the symmetric sector only covers the j = N/2 block.
class PiHamiltonian {
public:
    using Builder = std::function<CMatrix(const SpinMatrices&)>;

    static PiHamiltonian zdiag(ZDiagonalHamiltonian h)
    {
        PiHamiltonian p;
        p.z_ = h;
        return p;
    }

    static PiHamiltonian from_spin_ops(Builder b)
    {
        PiHamiltonian p;
        p.builder_ = std::move(b);
        return p;
    }

    static PiHamiltonian symmetric_sector(CMatrix h)
    {
        PiHamiltonian p;
        p.sym_ = std::move(h);
        return p;
    }

    bool is_zdiag() const { return z_.has_value(); }
    const ZDiagonalHamiltonian& z() const { return *z_; }
    bool has_builder() const { return static_cast<bool>(builder_); }
    const Builder& builder() const { return builder_; }
    bool is_symmetric_sector() const { return sym_.has_value(); }
    const CMatrix& symmetric_matrix() const { return *sym_; }

private:
    std::optional<ZDiagonalHamiltonian> z_;
    Builder builder_;
    std::optional<CMatrix> sym_;
};

namespace detail {

// One spin-flip transfer from block J to block J' through an (N-1)-spin irrep j.
struct DecayLink {
    int src = 0, dst = 0;  // block indices
    int shift = 0;         // dst row index = src row index + shift
    double weight = 0.0;   // N d^{(N-1)}_j / d^{(N)}_{J'}
    std::vector<double> g; // per source row: CG(j,M-1/2;1/2,1/2|J,M) CG(j,M-1/2;1/2,-1/2|J',M-1)
};

// Coupling of spin j with the N-th spin-1/2, Condon-Shortley phases.
// <j, M-1/2; 1/2, +1/2 | J, M>^2 for J = j +- 1/2.
inline double cg_up_sq(int two_j, int two_J, int two_M)
{
    const double j = 0.5 * two_j, m = 0.5 * two_M;
    const double v = two_J > two_j ? (j + m + 0.5) / (2 * j + 1) : (j - m + 0.5) / (2 * j + 1);
    return std::max(0.0, v);
}

// <j, M+1/2; 1/2, -1/2 | J, M>^2 for J = j +- 1/2.
inline double cg_down_sq(int two_j, int two_J, int two_M)
{
    const double j = 0.5 * two_j, m = 0.5 * two_M;
    const double v = two_J > two_j ? (j - m + 0.5) / (2 * j + 1) : (j + m + 0.5) / (2 * j + 1);
    return std::max(0.0, v);
}

inline std::vector<DecayLink> decay_links(const BlockLayout& lay)
{
    const int n = lay.n_spins;
    std::vector<DecayLink> links;
    for (int b = 0; b < lay.blocks(); ++b) {
        const int tJ = lay.two_j[b];
        for (int dj : {+1, -1}) {
            const int tj = tJ + dj; // spin of the first N-1 atoms
            if (tj < 0 || tj > n - 1) continue;
            const double dj_deg = static_cast<double>(dicke_degeneracy(n - 1, tj));
            for (int djp : {+1, -1}) {
                const int tJp = tj + djp;
                if (tJp < 0 || tJp > n) continue;
                const int bp = lay.index_of(tJp);
                DecayLink l;
                l.src = b;
                l.dst = bp;
                // row a <-> M = J - a; target M-1 sits at a' = J' - M + 1
                l.shift = (tJp - tJ) / 2 + 1;
                l.weight = n * dj_deg / lay.degeneracy[bp];
                l.g.resize(lay.dims[b]);
                for (int a = 0; a < lay.dims[b]; ++a) {
                    const int tM = tJ - 2 * a;
                    const int ap = a + l.shift;
                    if (ap < 0 || ap >= lay.dims[bp]) {
                        l.g[a] = 0.0;
                        continue;
                    }
                    // |j, M-1/2>|down> component of |J', M-1>
                    l.g[a] = std::sqrt(cg_up_sq(tj, tJ, tM) * cg_down_sq(tj, tJp, tM - 2));
                }
                links.push_back(std::move(l));
            }
        }
    }
    return links;
}

} // namespace detail

struct PiSolverOptions {
    IntegratorOptions integrator;
};

// Permutation-invariant solver for
//   d rho/dt = -i[H, rho] + Gamma D[Sz] rho + gamma sum_k D[sigma_-^k] rho.
class PiLindbladSolver {
public:
    PiLindbladSolver(int n, PiHamiltonian h, LindbladParams params, PiSolverOptions opt = {})
        : layout_(std::make_shared<const BlockLayout>(n)), h_(std::move(h)), p_(params), opt_(opt)
    {
        const BlockLayout& lay = *layout_;
        if (h_.is_symmetric_sector()) {
            if (p_.gamma > 0.0)
                throw ValidationError("non-PI Hamiltonian: a symmetric-sector matrix cannot act on the lower-j "
                                      "blocks populated by local decay; pass it as a function of spin operators");
            require(h_.symmetric_matrix().rows() == n + 1 && h_.symmetric_matrix().cols() == n + 1,
                    "symmetric-sector Hamiltonian must be (N+1)x(N+1)");
        }
        links_ = p_.gamma > 0.0 ? detail::decay_links(lay) : std::vector<detail::DecayLink>{};
        diag_.resize(lay.size);
        loss_.resize(lay.size);
        for (int b = 0; b < lay.blocks(); ++b) {
            const int d = lay.dims[b];
            for (int c = 0; c < d; ++c)
                for (int r = 0; r < d; ++r) {
                    const double mr = 0.5 * (lay.two_j[b] - 2 * r), mc = 0.5 * (lay.two_j[b] - 2 * c);
                    Complex rate = -p_.gamma_dephasing * (mr - mc) * (mr - mc);
                    if (h_.is_zdiag()) rate += -I * (h_.z().energy(mr) - h_.z().energy(mc));
                    const Eigen::Index idx = lay.offsets[b] + static_cast<Eigen::Index>(c) * d + r;
                    diag_[idx] = rate;
                    loss_[idx] = -p_.gamma * (n + mr + mc);
                }
        }
        if (h_.has_builder()) {
            for (int b = 0; b < lay.blocks(); ++b) {
                CMatrix hb = h_.builder()(spin_matrices(lay.two_j[b]));
                require(hb.rows() == lay.dims[b] && hb.cols() == lay.dims[b],
                        "Hamiltonian builder returned a matrix of the wrong size");
                require((hb - hb.adjoint()).cwiseAbs().maxCoeff() <= 1e-10, "Hamiltonian is not Hermitian");
                dense_.push_back(std::move(hb));
            }
        } else if (h_.is_symmetric_sector()) {
            dense_.push_back(h_.symmetric_matrix());
        }
    }

    const BlockLayout& layout() const { return *layout_; }
    const IntegratorStats& stats() const { return stats_; }

    template <class Callback>
    void evolve(const DickeBlockState& initial, const std::vector<double>& t_grid, Callback&& on_sample)
    {
        require(initial.n_spins() == layout_->n_spins, "initial state has a different N");
        if (h_.is_symmetric_sector())
            require(initial.lower_blocks_empty(),
                    "non-PI Hamiltonian: symmetric-sector matrix given but lower-j blocks are populated");
        auto rhs = [this](const CVector& y, CVector& out) { this->rhs(y, out); };
        auto trace = [this](const CVector& y) { return Complex(DickeBlockState(layout_, y).trace(), 0.0); };
        LawsonDormandPrince ode(diag_, rhs, trace, opt_.integrator);
        ode.integrate(initial.data(), t_grid, [&](size_t i, const CVector& y) {
            on_sample(i, DickeBlockState(layout_, y));
        });
        stats_ = ode.stats();
    }

    std::vector<DickeBlockState> evolve(const DickeBlockState& initial, const std::vector<double>& t_grid)
    {
        std::vector<DickeBlockState> out;
        out.reserve(t_grid.size());
        evolve(initial, t_grid, [&](size_t, const DickeBlockState& s) { out.push_back(s); });
        return out;
    }

private:
    // Everything except the diagonal rates in diag_.
    void rhs(const CVector& y, CVector& out) const
    {
        const BlockLayout& lay = *layout_;
        out = loss_.cwiseProduct(y);
        for (const auto& l : links_) {
            const int ds = lay.dims[l.src], dd = lay.dims[l.dst];
            const Complex* src = y.data() + lay.offsets[l.src];
            Complex* dst = out.data() + lay.offsets[l.dst];
            const double w = 2.0 * p_.gamma * l.weight;
            for (int c = 0; c < ds; ++c) {
                const int cp = c + l.shift;
                if (cp < 0 || cp >= dd || l.g[c] == 0.0) continue;
                for (int r = 0; r < ds; ++r) {
                    const int rp = r + l.shift;
                    if (rp < 0 || rp >= dd || l.g[r] == 0.0) continue;
                    dst[static_cast<Eigen::Index>(cp) * dd + rp] += w * l.g[r] * l.g[c] * src[static_cast<Eigen::Index>(c) * ds + r];
                }
            }
        }
        for (size_t b = 0; b < dense_.size(); ++b) {
            const int d = lay.dims[b];
            Eigen::Map<const CMatrix> rho(y.data() + lay.offsets[b], d, d);
            Eigen::Map<CMatrix> o(out.data() + lay.offsets[b], d, d);
            o.noalias() += -I * (dense_[b] * rho - rho * dense_[b]);
        }
    }

    std::shared_ptr<const BlockLayout> layout_;
    PiHamiltonian h_;
    LindbladParams p_;
    PiSolverOptions opt_;
    std::vector<detail::DecayLink> links_;
    std::vector<CMatrix> dense_;
    CVector diag_, loss_;
    IntegratorStats stats_;
};

inline std::vector<DickeBlockState> lindblad_evolve_pi(const DickeBlockState& initial, const PiHamiltonian& h,
                                                       const LindbladParams& params, const std::vector<double>& t_grid,
                                                       const PiSolverOptions& opt = {})
{
    PiLindbladSolver solver(initial.n_spins(), h, params, opt);
    return solver.evolve(initial, t_grid);
}

inline std::vector<DickeBlockState> lindblad_evolve_pi(const DickeVector& initial, const PiHamiltonian& h,
                                                       const LindbladParams& params, const std::vector<double>& t_grid,
                                                       const PiSolverOptions& opt = {})
{
    return lindblad_evolve_pi(DickeBlockState::from_pure(initial), h, params, t_grid, opt);
}

// Brute-force oracle on the full 2^N space. Bit k of a basis index is 0 for an
// excited (up) atom and 1 for a ground (down) atom.
class FullLindbladSolver {
public:
    FullLindbladSolver(int n, PiHamiltonian h, LindbladParams params, IntegratorOptions opt = {})
        : n_(n), dim_(Eigen::Index{1} << n), p_(params), opt_(opt)
    {
        require(n >= 1 && n <= 8, "full-space oracle is limited to N <= 8");
        require(!h.is_symmetric_sector(), "full-space oracle needs a Hamiltonian in terms of spin operators");
        ops_ = collective_ops();
        diag_.resize(dim_ * dim_);
        loss_.resize(dim_ * dim_);
        for (Eigen::Index c = 0; c < dim_; ++c)
            for (Eigen::Index r = 0; r < dim_; ++r) {
                const double mr = m_of(r), mc = m_of(c);
                Complex rate = -p_.gamma_dephasing * (mr - mc) * (mr - mc);
                if (h.is_zdiag()) rate += -I * (h.z().energy(mr) - h.z().energy(mc));
                diag_[c * dim_ + r] = rate;
                loss_[c * dim_ + r] = -p_.gamma * (n_ + mr + mc);
            }
        if (h.has_builder()) {
            dense_ = h.builder()(ops_);
            require(dense_->rows() == dim_, "Hamiltonian builder returned a matrix of the wrong size");
        }
    }

    Eigen::Index dim() const { return dim_; }
    const SpinMatrices& ops() const { return ops_; }
    double m_of(Eigen::Index a) const { return 0.5 * n_ - std::popcount(static_cast<std::uint64_t>(a)); }

    // |psi> in the symmetric subspace, amplitude psi_k / sqrt(C(N,k)) on each string with k down spins.
    CMatrix embed(const DickeVector& psi) const
    {
        require(psi.ensemble().n_spins() == n_, "state has a different N");
        CVector v(dim_);
        for (Eigen::Index a = 0; a < dim_; ++a) {
            const int k = std::popcount(static_cast<std::uint64_t>(a));
            v[a] = psi[k] / std::sqrt(static_cast<double>(binomial_u64(n_, k)));
        }
        return v * v.adjoint();
    }

    // <S,m|rho|S,m'> on the symmetric subspace.
    CMatrix symmetric_sector(const CMatrix& rho) const
    {
        CMatrix basis = CMatrix::Zero(dim_, n_ + 1);
        for (Eigen::Index a = 0; a < dim_; ++a) {
            const int k = std::popcount(static_cast<std::uint64_t>(a));
            basis(a, k) = 1.0 / std::sqrt(static_cast<double>(binomial_u64(n_, k)));
        }
        return basis.adjoint() * rho * basis;
    }

    template <class Callback>
    void evolve(const CMatrix& rho0, const std::vector<double>& t_grid, Callback&& on_sample)
    {
        require(rho0.rows() == dim_ && rho0.cols() == dim_, "initial density matrix has the wrong size");
        CVector y = Eigen::Map<const CVector>(rho0.data(), dim_ * dim_);
        auto rhs = [this](const CVector& v, CVector& out) { this->rhs(v, out); };
        auto trace = [this](const CVector& v) {
            Complex tr = 0.0;
            for (Eigen::Index a = 0; a < dim_; ++a) tr += v[a * dim_ + a];
            return tr;
        };
        LawsonDormandPrince ode(diag_, rhs, trace, opt_);
        ode.integrate(y, t_grid, [&](size_t i, const CVector& v) {
            on_sample(i, CMatrix(Eigen::Map<const CMatrix>(v.data(), dim_, dim_)));
        });
    }

private:
    SpinMatrices collective_ops() const
    {
        SpinMatrices s;
        s.sz = CMatrix::Zero(dim_, dim_);
        s.splus = CMatrix::Zero(dim_, dim_);
        for (Eigen::Index a = 0; a < dim_; ++a) {
            s.sz(a, a) = m_of(a);
            for (int k = 0; k < n_; ++k) {
                const Eigen::Index bit = Eigen::Index{1} << k;
                if (a & bit) s.splus(a & ~bit, a) += 1.0; // down -> up
            }
        }
        s.sminus = s.splus.adjoint();
        s.sx = 0.5 * (s.splus + s.sminus);
        s.sy = (s.splus - s.sminus) / (2.0 * I);
        return s;
    }

    void rhs(const CVector& y, CVector& out) const
    {
        out = loss_.cwiseProduct(y);
        if (p_.gamma > 0.0) {
            const double w = 2.0 * p_.gamma;
            for (int k = 0; k < n_; ++k) {
                const Eigen::Index bit = Eigen::Index{1} << k;
                for (Eigen::Index c = 0; c < dim_; ++c) {
                    if (c & bit) continue;
                    for (Eigen::Index r = 0; r < dim_; ++r) {
                        if (r & bit) continue;
                        out[(c | bit) * dim_ + (r | bit)] += w * y[c * dim_ + r];
                    }
                }
            }
        }
        if (dense_) {
            Eigen::Map<const CMatrix> rho(y.data(), dim_, dim_);
            Eigen::Map<CMatrix> o(out.data(), dim_, dim_);
            o.noalias() += -I * (*dense_ * rho - rho * *dense_);
        }
    }

    int n_;
    Eigen::Index dim_;
    LindbladParams p_;
    IntegratorOptions opt_;
    SpinMatrices ops_;
    std::optional<CMatrix> dense_;
    CVector diag_, loss_;
};

inline std::vector<CMatrix> lindblad_evolve_full(const DickeVector& initial, const PiHamiltonian& h,
                                                 const LindbladParams& params, const std::vector<double>& t_grid,
                                                 const IntegratorOptions& opt = {})
{
    FullLindbladSolver solver(initial.ensemble().n_spins(), h, params, opt);
    std::vector<CMatrix> out;
    solver.evolve(solver.embed(initial), t_grid, [&](size_t, const CMatrix& r) { out.push_back(r); });
    return out;
}

struct DampedRow {
    double t = 0.0;
    double trace = 0.0;
    QfiReport qfi;
    double mean_sz = 0.0;
    double min_eigenvalue = 0.0;
};

inline DampedRow observe(double t, const DickeBlockState& s)
{
    DampedRow row;
    row.t = t;
    row.trace = s.trace();
    row.mean_sz = s.mean_sz();
    row.min_eigenvalue = s.min_eigenvalue();
    row.qfi = qfi_mixed(s);
    return row;
}

// QFI along the damped cubic or one-axis-twisting evolution of |pi/2, 0>.
inline std::vector<DampedRow> damped_qfi_sweep(Scheme scheme, int n, const LindbladParams& params,
                                               const std::vector<double>& t_grid, const PiSolverOptions& opt = {})
{
    require(n >= 1 && n <= 60, "damped sweep supports 1 <= N <= 60");
    const SpinEnsemble ens(n);
    PiLindbladSolver solver(n, PiHamiltonian::zdiag(scheme_hamiltonian(scheme)), params, opt);
    std::vector<DampedRow> rows;
    rows.reserve(t_grid.size());
    solver.evolve(DickeBlockState::from_pure(css_state(ens, CssParams(0.5 * pi, 0.0))), t_grid,
                  [&](size_t i, const DickeBlockState& s) { rows.push_back(observe(t_grid[i], s)); });
    return rows;
}

} // namespace cubicspin
