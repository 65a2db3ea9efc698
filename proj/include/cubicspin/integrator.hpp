#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dicke.hpp"
#include "error.hpp"

namespace cubicspin {

struct IntegratorOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    double trace_tol = 1e-9; // per-step drift of the conserved linear functional
    double h_init = 1e-3;
    double h_min = 1e-13;
    long max_steps = 50'000'000;
};

struct IntegratorStats {
    long accepted = 0;
    long rejected = 0;
    long trace_rejected = 0;
    double max_trace_drift = 0.0;
};

// Adaptive Dormand-Prince 5(4) for dy/dt = D .* y + F(y), with D a constant
// elementwise rate. Each step is taken in the interaction picture of D relative
// to the step start (Lawson form), so large diagonal frequencies cost nothing
// while F stays explicit.
class LawsonDormandPrince {
public:
    using Rhs = std::function<void(const CVector& y, CVector& out)>;
    using Functional = std::function<Complex(const CVector& y)>;

    LawsonDormandPrince(CVector diag, Rhs f, Functional trace, IntegratorOptions opt = {})
        : d_(std::move(diag)), f_(std::move(f)), trace_(std::move(trace)), opt_(opt)
    {
    }

    const IntegratorStats& stats() const { return stats_; }

    // Integrates from t_grid[0] (where y holds the state) and calls on_sample(i, y)
    // at every grid time, including the first.
    template <class Callback>
    void integrate(CVector y, const std::vector<double>& t_grid, Callback&& on_sample)
    {
        require(!t_grid.empty(), "time grid is empty");
        for (size_t i = 1; i < t_grid.size(); ++i)
            require(t_grid[i] > t_grid[i - 1], "time grid must be strictly increasing");
        require(y.size() == d_.size(), "state size does not match the diagonal generator");

        on_sample(size_t{0}, static_cast<const CVector&>(y));
        double t = t_grid.front();
        double h = opt_.h_init;
        CVector k1(y.size());
        f_(y, k1);
        for (size_t gi = 1; gi < t_grid.size(); ++gi) {
            const double target = t_grid[gi];
            while (t < target) {
                const double remaining = target - t;
                const bool last = h >= remaining * (1.0 - 1e-12);
                const double hs = last ? remaining : h;
                double err = 0.0;
                bool trace_ok = true;
                CVector y_new = step(y, k1, hs, err, trace_ok);
                if (++steps_ > opt_.max_steps) throw NumericError("integrator exceeded the step budget");
                if (err <= 1.0 && trace_ok) {
                    y = std::move(y_new);
                    k1 = k_last_;
                    t = last ? target : t + hs;
                    ++stats_.accepted;
                    const double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
                    const double grown = hs * std::clamp(fac, 0.2, 5.0);
                    // a shortened landing step does not shrink the proposal
                    h = last ? std::max(h, grown) : grown;
                } else {
                    if (!trace_ok) ++stats_.trace_rejected;
                    ++stats_.rejected;
                    const double fac = trace_ok ? std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.5) : 0.5;
                    h = hs * fac;
                    if (h < opt_.h_min) throw NumericError("integrator step size underflow");
                }
            }
            on_sample(gi, static_cast<const CVector&>(y));
        }
    }

private:
    CVector scaled(const CVector& v, double tau) const
    {
        CVector out(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = std::exp(d_[i] * tau) * v[i];
        return out;
    }

    // One trial step. k1 = F(y). On return k_last_ = F(y_new).
    CVector step(const CVector& y, const CVector& k1, double h, double& err, bool& trace_ok)
    {
        static constexpr std::array<double, 7> c{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
        static constexpr double a[7][6] = {
            {},
            {1.0 / 5},
            {3.0 / 40, 9.0 / 40},
            {44.0 / 45, -56.0 / 15, 32.0 / 9},
            {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
            {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
            {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
        };
        static constexpr std::array<double, 7> b{35.0 / 384,     0.0, 500.0 / 1113, 125.0 / 192,
                                                 -2187.0 / 6784, 11.0 / 84, 0.0};
        static constexpr std::array<double, 7> bs{5179.0 / 57600,    0.0,          7571.0 / 16695, 393.0 / 640,
                                                  -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

        const Eigen::Index n = y.size();
        std::array<CVector, 7> k;
        k[0] = k1;
        CVector stage(n), fy(n);
        for (int s = 1; s < 7; ++s) {
            stage = y;
            for (int j = 0; j < s; ++j)
                if (a[s][j] != 0.0) stage.noalias() += (h * a[s][j]) * k[j];
            const double tau = c[s] * h;
            f_(scaled(stage, tau), fy);
            k[s] = scaled(fy, -tau);
        }
        // stage 7 sits at z5 (FSAL)
        CVector z5 = stage;
        CVector diff = CVector::Zero(n);
        for (int s = 0; s < 7; ++s)
            if (b[s] != bs[s]) diff.noalias() += (h * (b[s] - bs[s])) * k[s];
        CVector y_new = scaled(z5, h);
        diff = scaled(diff, h);
        err = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sc = opt_.atol + opt_.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
            err = std::max(err, std::abs(diff[i]) / sc);
        }
        k_last_ = scaled(k[6], h);
        const double drift = std::abs(trace_(y_new) - trace_(y));
        stats_.max_trace_drift = std::max(stats_.max_trace_drift, err <= 1.0 ? drift : 0.0);
        trace_ok = drift <= opt_.trace_tol;
        return y_new;
    }

    CVector d_;
    Rhs f_;
    Functional trace_;
    IntegratorOptions opt_;
    IntegratorStats stats_;
    CVector k_last_;
    long steps_ = 0;
};

} // namespace cubicspin
