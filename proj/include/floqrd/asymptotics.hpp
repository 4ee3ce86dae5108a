#pragma once

#include "floqrd/simulate.hpp"

namespace floqrd {

/// OLS fit of log(norm) against log(1+t): norm ~ C (1+t)^{-p}.
struct DecayFit {
    double exponent = 0.0;  // p
    double prefactor = 0.0; // C
    double t_a = 0.0, t_b = 0.0;
    double goodness = 0.0;  // max |log residual| over the window
};

inline DecayFit measure_decay(const std::vector<double>& t, const std::vector<double>& norm,
                              double t_a, double t_b) {
    if (t.size() != norm.size()) throw Error("decay series length mismatch");
    std::vector<double> x, y;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_a || t[i] > t_b) continue;
        if (!(norm[i] > 0.0)) throw Error("norms must be positive inside the fit window");
        x.push_back(std::log1p(t[i]));
        y.push_back(std::log(norm[i]));
    }
    if (x.size() < 10) throw EmptyWindow("fewer than 10 points in the decay-fit window");
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icept = (sy - slope * sx) / n;
    DecayFit fit;
    fit.exponent = -slope;
    fit.prefactor = std::exp(icept);
    fit.t_a = t_a;
    fit.t_b = t_b;
    for (std::size_t i = 0; i < x.size(); ++i)
        fit.goodness = std::max(fit.goodness, std::abs(y[i] - slope * x[i] - icept));
    return fit;
}

/// Scalar phase modulation alpha(t, x) and the residual beta = v - u_*' alpha.
struct PhaseField {
    double t = 0.0;
    Grid grid;
    Eigen::ArrayXd alpha;
    std::vector<Eigen::ArrayXd> beta;

    explicit PhaseField(const Grid& g) : grid(g) {}

    double mass() const { return alpha.sum() * grid.cell(); }
};

namespace detail {

inline double min_orbit_speed(const PeriodicOrbit& orbit) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& d : orbit.du) m = std::min(m, d.norm());
    return m;
}

/// Catmull-Rom evaluation of a periodic 1D grid array at physical x.
inline double sample_periodic(const Eigen::ArrayXd& a, const Grid& g, double x) {
    const int M = g.M;
    double pos = (x + g.L) / (2.0 * g.L) * M;
    pos = std::fmod(pos, double(M));
    if (pos < 0) pos += M;
    const int i1 = static_cast<int>(std::floor(pos)) % M;
    const double s = pos - std::floor(pos);
    const int i0 = (i1 + M - 1) % M, i2 = (i1 + 1) % M, i3 = (i1 + 2) % M;
    const double p0 = a[i0], p1 = a[i1], p2 = a[i2], p3 = a[i3];
    return p1 + 0.5 * s * (p2 - p0 +
           s * (2 * p0 - 5 * p1 + 4 * p2 - p3 + s * (3 * (p1 - p2) + p3 - p0)));
}

} // namespace detail

/// Projection of the deviation field v onto the phase direction:
/// alpha(x) = (U_*(t0 + t), v(x)) with the normalized adjoint.
inline PhaseField extract_phase_deviation(const FieldState& v, const PeriodicOrbit& orbit,
                                          const AdjointSolution& adjoint, double t0) {
    const double tube = 0.2 * detail::min_orbit_speed(orbit);
    if (!(field_norms(v).linf < tube))
        throw OutOfTube("deviation exceeds the orbit tube radius");
    const Vec U = adjoint.value(orbit, t0 + v.t);
    const Vec du = orbit.derivative(t0 + v.t);
    PhaseField ph(v.grid);
    ph.t = v.t;
    ph.alpha = U[0] * v.comps[0];
    for (int c = 1; c < v.ncomp(); ++c) ph.alpha += U[c] * v.comps[c];
    ph.beta.resize(v.ncomp());
    for (int c = 0; c < v.ncomp(); ++c) ph.beta[c] = v.comps[c] - du[c] * ph.alpha;
    return ph;
}

/// Same, starting from the full state u(t, x) = u_*(t0 + t) + v(t, x).
inline PhaseField extract_phase(const FieldState& state, const PeriodicOrbit& orbit,
                                const AdjointSolution& adjoint, double t0) {
    FieldState v = state;
    const Vec base = orbit.value(t0 + state.t);
    for (int c = 0; c < v.ncomp(); ++c) v.comps[c] -= base[c];
    return extract_phase_deviation(v, orbit, adjoint, t0);
}

/// Leading-order asymptotic phase mass of localized initial data, by grid
/// quadrature of the adjoint projection. The unmodeled O(delta^2) term is
/// reported as an uncertainty band.
struct AlphaStarPrediction {
    double value = 0.0;
    double band = 0.0; // proportional to delta^2 times the data volume
};

inline AlphaStarPrediction predicted_alpha_star(const FieldState& v0,
                                                const PeriodicOrbit& orbit,
                                                const AdjointSolution& adjoint, double t0) {
    const Vec U = adjoint.value(orbit, t0 + v0.t);
    double mass = 0.0;
    for (long i = 0; i < v0.grid.points(); ++i) {
        double a = 0.0;
        for (int c = 0; c < v0.ncomp(); ++c) a += U[c] * v0.comps[c][i];
        mass += a;
    }
    const Norms n = field_norms(v0);
    return {mass * v0.grid.cell(), n.linf * n.l1};
}

/// Heat-kernel profile of the phase, G(x) = (4 pi d0)^{-n/2} exp(-|x|^2 / 4 d0).
inline double gaussian_profile(double xi_sq, double d0, int n) {
    return std::pow(4.0 * M_PI * d0, -0.5 * n) * std::exp(-xi_sq / (4.0 * d0));
}

/// Rescaled phase profile t^{n/2} alpha(t, xi sqrt(t)) against alpha_* G(xi)
/// on a fixed reference grid.
struct ProfileComparison {
    double t = 0.0;
    std::vector<double> xi;             // 257 uniform points, |xi| <= 8 sqrt(d0)
    std::vector<double> rescaled_alpha;
    std::vector<double> alpha_star_G;
    double err_l1 = 0.0, err_linf = 0.0;
};

inline ProfileComparison compare_profile(const PhaseField& phase, double alpha_star,
                                         double d0) {
    const int n = phase.grid.dim;
    const double t = phase.t;
    if (!(t > 0.0)) throw Error("profile comparison needs t > 0");
    const double diff_len = std::sqrt(d0 * t);
    long inside = 0;
    if (n == 1) {
        for (int i = 0; i < phase.grid.M; ++i)
            if (std::abs(phase.grid.coord(i)) <= 4.0 * diff_len) ++inside;
    } else {
        // count along the x-axis slice used below
        for (int i = 0; i < phase.grid.M; ++i)
            if (std::abs(phase.grid.coord(i)) <= 4.0 * diff_len) ++inside;
    }
    if (inside < 32)
        throw UnderResolved("fewer than 32 grid points inside |x| <= 4 sqrt(d0 t)");

    ProfileComparison cmp;
    cmp.t = t;
    const int P = 257;
    const double xi_max = 8.0 * std::sqrt(d0);
    const double dxi = 2.0 * xi_max / (P - 1);
    const double scale = std::pow(t, 0.5 * n);
    // for n = 2 the comparison runs along the x-axis slice through the origin
    Eigen::ArrayXd slice;
    if (n == 2) {
        slice.resize(phase.grid.M);
        for (int ix = 0; ix < phase.grid.M; ++ix)
            slice[ix] = phase.alpha[long(phase.grid.M / 2) * phase.grid.M + ix];
    }
    for (int p = 0; p < P; ++p) {
        const double xi = -xi_max + p * dxi;
        const double x = xi * std::sqrt(t);
        const double a = (n == 1)
                             ? detail::sample_periodic(phase.alpha, phase.grid, x)
                             : detail::sample_periodic(slice, phase.grid, x);
        const double re = scale * a;
        const double gg = alpha_star * gaussian_profile(xi * xi, d0, n);
        cmp.xi.push_back(xi);
        cmp.rescaled_alpha.push_back(re);
        cmp.alpha_star_G.push_back(gg);
        const double d = std::abs(re - gg);
        cmp.err_l1 += d * dxi;
        cmp.err_linf = std::max(cmp.err_linf, d);
    }
    return cmp;
}

/// Per-snapshot diagnostics row backing the asymptotics CSV.
struct AsymptoticsRow {
    double t;
    double alpha_mass;
    double beta_l1;
    double beta_linf_scaled; // (1+t)^{n/2} * Linf(beta)
    double profile_err_l1;
    double profile_err_linf;
};

inline std::vector<AsymptoticsRow> asymptotics_series(
    const std::vector<FieldState>& snapshots, const PeriodicOrbit& orbit,
    const AdjointSolution& adjoint, double t0, double alpha_star, double d0,
    bool states_are_deviations = false) {
    std::vector<AsymptoticsRow> rows;
    for (const auto& snap : snapshots) {
        PhaseField ph = states_are_deviations
                            ? extract_phase_deviation(snap, orbit, adjoint, t0)
                            : extract_phase(snap, orbit, adjoint, t0);
        AsymptoticsRow row{};
        row.t = snap.t;
        row.alpha_mass = ph.mass();
        FieldState beta(snap.grid, snap.ncomp());
        beta.comps = ph.beta;
        const Norms bn = field_norms(beta);
        row.beta_l1 = bn.l1;
        row.beta_linf_scaled = bn.linf * std::pow(1.0 + snap.t, 0.5 * snap.grid.dim);
        if (snap.t > 0.0 && d0 > 0.0) {
            try {
                const ProfileComparison cmp = compare_profile(ph, alpha_star, d0);
                row.profile_err_l1 = cmp.err_l1;
                row.profile_err_linf = cmp.err_linf;
            } catch (const UnderResolved&) {
                row.profile_err_l1 = row.profile_err_linf =
                    std::numeric_limits<double>::quiet_NaN();
            }
        } else {
            row.profile_err_l1 = row.profile_err_linf =
                std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace floqrd
