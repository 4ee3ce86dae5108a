#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "floqrd/errors.hpp"

namespace floqrd {

/// Tolerances for the adaptive Dormand-Prince 5(4) integrator.
/// Defaults are tight on purpose: Floquet multipliers near 1 are only as
/// good as the flow that produces them.
struct OdeOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    double initial_step = 1e-3;
    double min_step = 1e-14;
    long max_steps = 50'000'000;
};

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double dp_c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
inline constexpr double dp_a[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
// 5th order solution weights (same as last row of a: FSAL).
inline constexpr double dp_b5[7] = {35.0 / 384,      0.0,  500.0 / 1113, 125.0 / 192,
                                    -2187.0 / 6784, 11.0 / 84, 0.0};
// Error weights b5 - b4.
inline constexpr double dp_e[7] = {71.0 / 57600,  0.0,          -71.0 / 16695, 71.0 / 1920,
                                   -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

} // namespace detail

/// Integrates y' = rhs(t, y) from t0 to t1 in place, forward or backward.
/// rhs has signature void(double t, const VectorXd& y, VectorXd& dy).
template <class Rhs>
void integrate(Rhs&& rhs, double t0, double t1, Eigen::VectorXd& y,
               const OdeOptions& opts = {}) {
    using Eigen::VectorXd;
    if (t0 == t1) return;
    const double dir = (t1 > t0) ? 1.0 : -1.0;
    const auto n = y.size();

    VectorXd k[7];
    for (auto& ki : k) ki.resize(n);
    VectorXd ytmp(n), ynew(n), yerr(n);

    double t = t0;
    double h = dir * std::min(opts.initial_step, std::abs(t1 - t0));
    rhs(t, y, k[0]);

    for (long step = 0; step < opts.max_steps; ++step) {
        if (dir * (t + h - t1) > 0.0) h = t1 - t;

        for (int i = 1; i < 7; ++i) {
            ytmp = y;
            for (int j = 0; j < i; ++j)
                if (detail::dp_a[i][j] != 0.0) ytmp += (h * detail::dp_a[i][j]) * k[j];
            rhs(t + detail::dp_c[i] * h, ytmp, k[i]);
        }
        ynew = y;
        yerr.setZero();
        for (int i = 0; i < 7; ++i) {
            if (detail::dp_b5[i] != 0.0) ynew += (h * detail::dp_b5[i]) * k[i];
            if (detail::dp_e[i] != 0.0) yerr += (h * detail::dp_e[i]) * k[i];
        }

        double err = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double scale =
                opts.abs_tol + opts.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            const double e = yerr[i] / scale;
            err += e * e;
        }
        err = std::sqrt(err / static_cast<double>(n));

        if (err <= 1.0) {
            t += h;
            y.swap(ynew);
            k[0].swap(k[6]); // FSAL
            if (dir * (t - t1) >= 0.0) return;
        }

        const double factor =
            std::clamp(0.9 * std::pow(err > 0.0 ? 1.0 / err : 1e16, 0.2), 0.2, 5.0);
        h *= factor;
        if (std::abs(h) < opts.min_step)
            throw IntegratorFailure("step size underflow at t = " + std::to_string(t));
    }
    throw IntegratorFailure("maximum step count exceeded");
}

} // namespace floqrd
