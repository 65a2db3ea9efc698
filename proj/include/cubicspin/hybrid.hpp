#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>
#include <vector>

#include "cat.hpp"
#include "dicke.hpp"
#include "evolution.hpp"
#include "open_dynamics.hpp"
#include "qfi.hpp"

namespace cubicspin {

// H = chi (eps Sz^3 + Sy^2)
struct CqaParams {
    double epsilon = 0.29;
    double chi = 1.0;
    int n = 20;

    CqaParams(double epsilon_, int n_, double chi_ = 1.0) : epsilon(epsilon_), chi(chi_), n(n_)
    {
        require(std::isfinite(epsilon) && epsilon >= 0.0, "epsilon must be >= 0");
        require(std::isfinite(chi) && chi > 0.0, "chi must be > 0");
        require(n >= 1, "N must be positive");
    }
};

inline CMatrix cqa_matrix(const SpinMatrices& s, double epsilon, double chi)
{
    return chi * (epsilon * s.sz * s.sz * s.sz + s.sy * s.sy);
}

inline CollectiveOperator cqa_hamiltonian(const CqaParams& p)
{
    const SpinEnsemble ens(p.n);
    return CollectiveOperator(ens, cqa_matrix(spin_matrices(p.n), p.epsilon, p.chi));
}

// Same generator for the block solver, acting on every spin-j block.
inline PiHamiltonian cqa_pi_hamiltonian(double epsilon, double chi = 1.0)
{
    return PiHamiltonian::from_spin_ops([=](const SpinMatrices& s) { return cqa_matrix(s, epsilon, chi); });
}

struct CqaRow {
    double t = 0.0;
    double mean_sz = 0.0;
    double mean_txy = 0.0; // <Sx Sy + Sy Sx>
    double qfi = 0.0;
    double norm = 1.0;
    double energy = 0.0;
    double residual = std::numeric_limits<double>::quiet_NaN(); // d<Sz>/dt + chi <Txy>, interior points
};

inline std::vector<CqaRow> cqa_trajectory(const CqaParams& p, const std::vector<double>& t_grid,
                                          std::optional<DickeVector> initial = std::nullopt)
{
    for (size_t i = 1; i < t_grid.size(); ++i)
        require(t_grid[i] > t_grid[i - 1], "time grid must be strictly increasing");
    const SpinEnsemble ens(p.n);
    const DickeVector psi0 = initial ? *initial : css_state(ens, CssParams(0.5 * pi, 0.0));
    require(psi0.ensemble() == ens, "initial state has a different N");
    const CollectiveOperator h = cqa_hamiltonian(p);
    const HermitianPropagator prop(h);
    const CVector c = prop.project(psi0.amplitudes());
    std::vector<CqaRow> rows;
    rows.reserve(t_grid.size());
    for (double t : t_grid) {
        const DickeVector psi(ens, prop.at(c, t));
        const SpinMoments mo = spin_moments(psi);
        CqaRow r;
        r.t = t;
        r.mean_sz = mo.mean[2];
        r.mean_txy = 2.0 * mo.second(0, 1);
        r.qfi = make_report(mo.covariance(), 4.0).qfi;
        r.norm = psi.norm();
        r.energy = expectation(psi, h).real();
        rows.push_back(r);
    }
    for (size_t i = 1; i + 1 < rows.size(); ++i)
        rows[i].residual = (rows[i + 1].mean_sz - rows[i - 1].mean_sz) / (rows[i + 1].t - rows[i - 1].t) +
                           p.chi * rows[i].mean_txy;
    return rows;
}

struct GhzFidelity {
    double fidelity = 0.0; // best |<GHZ_phi^+-|psi>|^2
    double phi = 0.0;
    GhzSign sign = GhzSign::plus;
    // Same search with the relative phase of the two lobes left free:
    // max over phi of (|<phi|psi>| + |<phi+pi|psi>|)^2 / 2.
    double phase_free_fidelity = 0.0;
    double phase_free_phi = 0.0;
};

// max over phi and sign of |<GHZ_phi^+-|psi>|^2: grid of step pi/720, then golden-section polish.
inline GhzFidelity ghz_fidelity(const DickeVector& state)
{
    const SpinEnsemble& ens = state.ensemble();
    const RVector mag = css_magnitudes(ens.n_spins(), 0.5 * pi);
    const CVector& psi = state.amplitudes();
    auto overlap = [&](double phi) { // <pi/2,phi|_m psi>
        Complex acc = 0.0;
        for (int k = 0; k < ens.dim(); ++k) acc += mag[k] * std::polar(1.0, 0.5 * ens.two_m(k) * phi) * psi[k];
        return acc;
    };
    auto fid = [&](double phi, GhzSign sg) {
        const Complex a = overlap(phi), b = overlap(phi + pi);
        return 0.5 * std::norm(sg == GhzSign::plus ? a + b : a - b);
    };
    auto free_fid = [&](double phi) {
        const double a = std::abs(overlap(phi)), b = std::abs(overlap(phi + pi));
        return 0.5 * (a + b) * (a + b);
    };
    auto polish = [](auto&& f, double centre, double half_width) {
        double lo = centre - half_width, hi = centre + half_width;
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
        double f1 = f(x1), f2 = f(x2);
        while (hi - lo > 1e-10) {
            if (f1 > f2) {
                hi = x2; x2 = x1; f2 = f1;
                x1 = hi - g * (hi - lo); f1 = f(x1);
            } else {
                lo = x1; x1 = x2; f1 = f2;
                x2 = lo + g * (hi - lo); f2 = f(x2);
            }
        }
        const double xm = 0.5 * (lo + hi);
        return std::pair{xm, f(xm)};
    };
    const int steps = 1440;
    const double dphi = pi / 720.0;
    GhzFidelity best;
    best.fidelity = -1.0;
    best.phase_free_fidelity = -1.0;
    for (int j = 0; j < steps; ++j) {
        for (GhzSign sg : {GhzSign::plus, GhzSign::minus}) {
            const double f = fid(j * dphi, sg);
            if (f > best.fidelity) {
                best.fidelity = f;
                best.phi = j * dphi;
                best.sign = sg;
            }
        }
        const double f = free_fid(j * dphi);
        if (f > best.phase_free_fidelity) {
            best.phase_free_fidelity = f;
            best.phase_free_phi = j * dphi;
        }
    }
    const auto [xs, fs] = polish([&](double x) { return fid(x, best.sign); }, best.phi, dphi);
    if (fs > best.fidelity) {
        best.fidelity = fs;
        best.phi = xs;
    }
    const auto [xf, ff] = polish(free_fid, best.phase_free_phi, dphi);
    if (ff > best.phase_free_fidelity) {
        best.phase_free_fidelity = ff;
        best.phase_free_phi = xf;
    }
    best.phi = std::fmod(best.phi + 2.0 * pi, 2.0 * pi);
    best.phase_free_phi = std::fmod(best.phase_free_phi + 2.0 * pi, 2.0 * pi);
    return best;
}

struct GhzSearchResult {
    int n = 0;
    double epsilon_opt = 0.0;
    double t_f = 0.0;
    double qfi_max = 0.0;
    double fidelity = 0.0;
    double phase_free_fidelity = 0.0;
    double ghz_phi = 0.0;
    GhzSign ghz_sign = GhzSign::plus;
    double speedup = 0.0; // t_f / (pi/2)
    int evaluations = 0;
};

struct Range {
    double lo, hi;
};

struct GhzSearchOptions {
    double d_eps = 0.01;
    double d_t = 0.01;
    double simplex_tol = 1e-4;
    int max_iterations = 4000;
    int seeds = 8; // best distinct grid maxima refined
    unsigned threads = 1;
};

// 2-D Nelder-Mead maximisation of f inside a box.
struct SimplexResult {
    double x = 0.0, y = 0.0, value = 0.0;
    int evaluations = 0;
};

inline SimplexResult nelder_mead_max(const std::function<double(double, double)>& f, double x0, double y0,
                                     double sx, double sy, Range bx, Range by, double tol, int max_iter)
{
    int evals = 0;
    auto obj = [&](const Eigen::Vector2d& p) {
        ++evals;
        if (p[0] < bx.lo || p[0] > bx.hi || p[1] < by.lo || p[1] > by.hi) return std::numeric_limits<double>::infinity();
        return -f(p[0], p[1]);
    };
    std::array<Eigen::Vector2d, 3> v{Eigen::Vector2d(x0, y0), Eigen::Vector2d(x0 + sx, y0), Eigen::Vector2d(x0, y0 + sy)};
    for (int i = 1; i < 3; ++i)
        if (obj(v[i]) == std::numeric_limits<double>::infinity()) {
            v[i] = v[0] - (v[i] - v[0]);
        }
    std::array<double, 3> fv{obj(v[0]), obj(v[1]), obj(v[2])};
    auto diameter = [&] {
        return std::max({(v[0] - v[1]).norm(), (v[0] - v[2]).norm(), (v[1] - v[2]).norm()});
    };
    for (int it = 0; it < max_iter && diameter() >= tol; ++it) {
        std::array<int, 3> idx{0, 1, 2};
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        const int best = idx[0], mid = idx[1], worst = idx[2];
        const Eigen::Vector2d centroid = 0.5 * (v[best] + v[mid]);
        const Eigen::Vector2d xr = centroid + (centroid - v[worst]);
        const double fr = obj(xr);
        if (fr < fv[best]) {
            const Eigen::Vector2d xe = centroid + 2.0 * (centroid - v[worst]);
            const double fe = obj(xe);
            if (fe < fr) { v[worst] = xe; fv[worst] = fe; }
            else { v[worst] = xr; fv[worst] = fr; }
        } else if (fr < fv[mid]) {
            v[worst] = xr; fv[worst] = fr;
        } else {
            const bool outside = fr < fv[worst];
            const Eigen::Vector2d xc = outside ? Eigen::Vector2d(centroid + 0.5 * (xr - centroid))
                                               : Eigen::Vector2d(centroid + 0.5 * (v[worst] - centroid));
            const double fc = obj(xc);
            if (fc < (outside ? fr : fv[worst])) {
                v[worst] = xc; fv[worst] = fc;
            } else {
                for (int i : {mid, worst}) {
                    v[i] = v[best] + 0.5 * (v[i] - v[best]);
                    fv[i] = obj(v[i]);
                }
            }
        }
    }
    int b = 0;
    for (int i = 1; i < 3; ++i)
        if (fv[i] < fv[b]) b = i;
    return {v[b][0], v[b][1], -fv[b], evals};
}

// QFI over an (eps, t) grid for the CQA evolution of |pi/2,0>, plus local refinement.
class GhzLandscape {
public:
    GhzLandscape(int n, Range eps, Range t, GhzSearchOptions opt = {})
        : ens_(n), eps_range_(eps), t_range_(t), opt_(opt),
          psi0_(css_state(ens_, CssParams(0.5 * pi, 0.0)))
    {
        require(eps.hi >= eps.lo && eps.lo >= 0.0, "empty or negative epsilon range");
        require(t.hi > t.lo && t.lo >= 0.0, "empty time range");
        const long n_eps = static_cast<long>(std::floor((eps.hi - eps.lo) / opt.d_eps + 1e-9)) + 1;
        for (long i = 0; i < n_eps; ++i) eps_.push_back(eps.lo + i * opt.d_eps);
        // multiples of d_t inside the range; t = 0 is skipped since every epsilon gives the CSS there
        for (long j = std::max(1L, static_cast<long>(std::ceil(t.lo / opt.d_t - 1e-9)));; ++j) {
            const double tv = j * opt.d_t;
            if (tv > t.hi + 1e-12) break;
            t_.push_back(tv);
        }
        require(!eps_.empty() && !t_.empty(), "search grid is empty");
        table_.assign(eps_.size() * t_.size(), 0.0);
        auto fill = [&](size_t row) {
            const HermitianPropagator prop(cqa_matrix(spin_matrices(n), eps_[row], 1.0));
            const CVector c = prop.project(psi0_.amplitudes());
            for (size_t j = 0; j < t_.size(); ++j)
                table_[row * t_.size() + j] = qfi_pure(DickeVector(ens_, prop.at(c, t_[j]))).qfi;
        };
        const unsigned threads = std::max(1u, opt.threads);
        if (threads == 1) {
            for (size_t r = 0; r < eps_.size(); ++r) fill(r);
        } else {
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < threads; ++w)
                pool.emplace_back([&, w] {
                    for (size_t r = w; r < eps_.size(); r += threads) fill(r);
                });
        }
    }

    int n() const { return ens_.n_spins(); }
    const std::vector<double>& eps_grid() const { return eps_; }
    const std::vector<double>& t_grid() const { return t_; }
    double qfi_at_cell(size_t i, size_t j) const { return table_[i * t_.size() + j]; }

    double qfi(double eps, double t) const
    {
        const HermitianPropagator prop(cqa_matrix(spin_matrices(n()), eps, 1.0));
        return qfi_pure(prop.apply(psi0_, t)).qfi;
    }

    DickeVector state(double eps, double t) const
    {
        return HermitianPropagator(cqa_matrix(spin_matrices(n()), eps, 1.0)).apply(psi0_, t);
    }

    // Best point with t <= t_cap: strongest grid cells as seeds, simplex polish.
    GhzSearchResult best(double t_cap = std::numeric_limits<double>::infinity()) const
    {
        struct Cell {
            size_t i, j;
            double q;
        };
        std::vector<Cell> cells;
        for (size_t i = 0; i < eps_.size(); ++i)
            for (size_t j = 0; j < t_.size() && t_[j] <= t_cap + 1e-12; ++j) {
                const double q = qfi_at_cell(i, j);
                bool local = true;
                for (int di = -1; di <= 1 && local; ++di)
                    for (int dj = -1; dj <= 1; ++dj) {
                        const long ii = static_cast<long>(i) + di, jj = static_cast<long>(j) + dj;
                        if ((di || dj) && ii >= 0 && jj >= 0 && ii < static_cast<long>(eps_.size()) &&
                            jj < static_cast<long>(t_.size()) && t_[jj] <= t_cap + 1e-12 &&
                            qfi_at_cell(ii, jj) > q) {
                            local = false;
                            break;
                        }
                    }
                if (local) cells.push_back({i, j, q});
            }
        require(!cells.empty(), "no grid cell satisfies the time cap");
        std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) { return a.q > b.q; });
        const Range by{t_range_.lo, std::min(t_range_.hi, t_cap)};
        GhzSearchResult res;
        res.n = n();
        res.qfi_max = -1.0;
        auto f = [&](double e, double t) { return qfi(e, t); };
        for (int s = 0; s < opt_.seeds && s < static_cast<int>(cells.size()); ++s) {
            const Cell& c = cells[s];
            const SimplexResult r = nelder_mead_max(f, eps_[c.i], t_[c.j], 0.5 * opt_.d_eps, 0.5 * opt_.d_t,
                                                    eps_range_, by, opt_.simplex_tol, opt_.max_iterations);
            res.evaluations += r.evaluations;
            if (r.value > res.qfi_max) {
                res.qfi_max = r.value;
                res.epsilon_opt = r.x;
                res.t_f = r.y;
            }
        }
        const GhzFidelity gf = ghz_fidelity(state(res.epsilon_opt, res.t_f));
        res.fidelity = gf.fidelity;
        res.phase_free_fidelity = gf.phase_free_fidelity;
        res.ghz_phi = gf.phi;
        res.ghz_sign = gf.sign;
        res.speedup = res.t_f / (0.5 * pi);
        return res;
    }

    // Earliest preparation within a relative QFI sacrifice of the global optimum:
    // the first grid time whose best cell reaches (1 - sacrifice) * qfi_max caps a
    // constrained search.
    GhzSearchResult fast_branch(const GhzSearchResult& global, double sacrifice) const
    {
        require(sacrifice >= 0.0 && sacrifice < 1.0, "sacrifice must lie in [0, 1)");
        const double threshold = (1.0 - sacrifice) * global.qfi_max;
        for (size_t j = 0; j < t_.size(); ++j) {
            double q = 0.0;
            for (size_t i = 0; i < eps_.size(); ++i) q = std::max(q, qfi_at_cell(i, j));
            if (q >= threshold) return best(t_[j] + opt_.d_t);
        }
        return global;
    }

    // Constrained optimum for each time cap.
    std::vector<GhzSearchResult> constrained_sweep(const std::vector<double>& t_caps) const
    {
        std::vector<GhzSearchResult> out;
        for (double cap : t_caps) out.push_back(best(cap));
        return out;
    }

private:
    SpinEnsemble ens_;
    Range eps_range_, t_range_;
    GhzSearchOptions opt_;
    DickeVector psi0_;
    std::vector<double> eps_, t_, table_;
};

// Default time window is the accelerated one, t_f <= pi/2.
inline GhzSearchResult optimize_ghz(int n, Range eps = {0.01, 1.0}, Range t = {0.0, 0.5 * pi},
                                    GhzSearchOptions opt = {})
{
    return GhzLandscape(n, eps, t, opt).best();
}

} // namespace cubicspin
