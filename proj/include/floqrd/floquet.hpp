#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "floqrd/orbit.hpp"

namespace floqrd {

using Cplx = std::complex<double>;

/// Period map F_k(T,0) of u' = (-k^2 D + f'(u_*(t))) u.
struct Monodromy {
    double k = 0.0;
    Mat F;
};

/// Computes the monodromy by integrating the matrix variational equation
/// along the orbit (state and fundamental matrix advanced together, so the
/// orbit is never interpolated).
inline Monodromy monodromy(const KineticsModel& model, const PeriodicOrbit& orbit,
                           const DiffusionMatrix& diffusion, double k,
                           const OdeOptions& opts = {}) {
    if (k < 0.0) throw Error("wavenumber must be nonnegative");
    const int N = model.dim;
    const Mat K = -k * k * diffusion.D;
    Eigen::VectorXd y(N + N * N);
    y.head(N) = orbit.u[0];
    Eigen::Map<Mat>(y.data() + N, N, N) = Mat::Identity(N, N);
    Vec fu(N);
    Mat J(N, N);
    integrate(
        [&](double, const Eigen::VectorXd& z, Eigen::VectorXd& dz) {
            const Vec zu = z.head(N);
            model.f(zu, fu);
            if (model.jacobian)
                model.jacobian(zu, J);
            else
                J = fd_jacobian(model, zu);
            dz.head(N) = fu;
            Eigen::Map<Mat>(dz.data() + N, N, N).noalias() =
                (K + J) * Eigen::Map<const Mat>(z.data() + N, N, N);
        },
        0.0, orbit.period, y, opts);
    return Monodromy{k, Eigen::Map<Mat>(y.data() + N, N, N)};
}

/// Floquet multipliers of F (dense real Schur based eigensolver).
inline std::vector<Cplx> floquet_multipliers(const Mat& F) {
    Eigen::EigenSolver<Mat> es(F, false);
    std::vector<Cplx> mu(F.rows());
    for (Eigen::Index i = 0; i < F.rows(); ++i) mu[i] = es.eigenvalues()[i];
    return mu;
}

/// lambda = log(mu)/T with the principal log; Im lambda lands in
/// (-omega/2, omega/2] automatically. |mu| below the double floor is
/// reported with Re lambda = -infinity.
inline Cplx multiplier_to_exponent(Cplx mu, double T) {
    if (std::abs(mu) < 1e-300)
        return {-std::numeric_limits<double>::infinity(), 0.0};
    return std::log(mu) / T;
}

/// Strip-reduced Floquet exponents of a monodromy, sorted by descending
/// real part.
inline std::vector<Cplx> floquet_exponents(const Monodromy& m, double T) {
    std::vector<Cplx> lam;
    for (Cplx mu : floquet_multipliers(m.F)) lam.push_back(multiplier_to_exponent(mu, T));
    std::sort(lam.begin(), lam.end(), [](Cplx a, Cplx b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    return lam;
}

/// One tracked exponent curve over the wavenumber grid.
struct FloquetBranch {
    std::vector<double> k;
    std::vector<Cplx> lambda;      // strip-reduced exponents
    std::vector<Cplx> multiplier;  // untracked-log companion, continuous in k
    bool neutral = false;          // lambda(0) ~ 0 branch

    double max_re() const {
        double m = -std::numeric_limits<double>::infinity();
        for (Cplx l : lambda) m = std::max(m, l.real());
        return m;
    }
};

struct SweepDiagnostics {
    std::vector<std::string> notes; // branch-collision and tracking remarks
};

/// Tracks Floquet branches over an ascending k-grid starting at 0.
/// Matching happens on the multipliers (continuous in k, no log branch
/// cuts); ambiguous matches are resolved by extrapolating the previous
/// trend and noted in the diagnostics.
inline std::vector<FloquetBranch> spectrum_sweep(const KineticsModel& model,
                                                 const PeriodicOrbit& orbit,
                                                 const DiffusionMatrix& diffusion,
                                                 const std::vector<double>& k_grid,
                                                 const OdeOptions& opts = {},
                                                 SweepDiagnostics* diag = nullptr) {
    if (k_grid.empty() || k_grid.front() != 0.0)
        throw Error("k grid must be ascending and start at 0");
    for (std::size_t i = 1; i < k_grid.size(); ++i)
        if (k_grid[i] <= k_grid[i - 1]) throw Error("k grid must be strictly ascending");

    const int N = model.dim;
    const double T = orbit.period;
    const double omega = 2 * M_PI / T;
    std::vector<FloquetBranch> branches(N);

    // distance in exponent space; imaginary parts compared modulo omega
    auto lam_dist = [omega](Cplx a, Cplx b) {
        const double re = std::min(std::abs(a.real() - b.real()), 1e6);
        double im = std::fmod(std::abs(a.imag() - b.imag()), omega);
        im = std::min(im, omega - im);
        return std::hypot(re, im);
    };
    auto finite = [](Cplx l) {
        return std::isinf(l.real()) ? Cplx(-700.0, l.imag()) : l;
    };

    std::vector<Cplx> prev(N), prev2(N);
    for (std::size_t gi = 0; gi < k_grid.size(); ++gi) {
        const double k = k_grid[gi];
        auto mu = floquet_multipliers(monodromy(model, orbit, diffusion, k, opts).F);
        std::vector<Cplx> lam(N);
        for (int i = 0; i < N; ++i) lam[i] = finite(multiplier_to_exponent(mu[i], T));

        std::vector<int> assign(N, -1);
        if (gi == 0) {
            // initial order: descending Re lambda
            std::vector<int> idx(N);
            for (int i = 0; i < N; ++i) idx[i] = i;
            std::sort(idx.begin(), idx.end(),
                      [&](int a, int b) { return lam[a].real() > lam[b].real(); });
            for (int j = 0; j < N; ++j) assign[j] = idx[j];
        } else {
            // predict each branch by trend extrapolation, then greedy
            // minimum-distance assignment
            std::vector<Cplx> pred(N);
            for (int j = 0; j < N; ++j)
                pred[j] = (gi >= 2) ? 2.0 * prev[j] - prev2[j] : prev[j];
            std::vector<bool> used(N, false);
            struct Cand {
                double d;
                int branch, eig;
            };
            std::vector<Cand> cands;
            for (int j = 0; j < N; ++j)
                for (int e = 0; e < N; ++e)
                    cands.push_back({lam_dist(lam[e], pred[j]), j, e});
            std::sort(cands.begin(), cands.end(),
                      [](const Cand& a, const Cand& b) { return a.d < b.d; });
            std::vector<bool> branch_done(N, false);
            for (const Cand& c : cands) {
                if (branch_done[c.branch] || used[c.eig]) continue;
                // collision diagnostic: another free eigenvalue equally close
                if (diag) {
                    for (int e = 0; e < N; ++e)
                        if (e != c.eig && !used[e] &&
                            std::abs(lam_dist(lam[e], pred[c.branch]) - c.d) < 1e-12) {
                            diag->notes.push_back(
                                "branch collision at k = " + std::to_string(k) +
                                " resolved by trend extrapolation");
                            break;
                        }
                }
                assign[c.branch] = c.eig;
                branch_done[c.branch] = true;
                used[c.eig] = true;
            }
        }

        for (int j = 0; j < N; ++j) {
            branches[j].k.push_back(k);
            branches[j].multiplier.push_back(mu[assign[j]]);
            branches[j].lambda.push_back(multiplier_to_exponent(mu[assign[j]], T));
        }
        prev2 = prev;
        for (int j = 0; j < N; ++j) prev[j] = finite(lam[assign[j]]);
    }

    // neutral branch: multiplier closest to 1 at k = 0
    int neutral = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < N; ++j) {
        const double d = std::abs(branches[j].multiplier.front() - 1.0);
        if (d < best) {
            best = d;
            neutral = j;
        }
    }
    if (best > 1e-6)
        throw GridTooCoarse("no Floquet multiplier near 1 at k = 0; orbit invalid?");
    branches[neutral].neutral = true;
    return branches;
}

/// Bounded solution of the adjoint equation -U' = f'(u_*(t))^T U,
/// normalized so (U(t), u_*'(t)) = 1 for all t.
struct AdjointSolution {
    std::vector<Vec> U;     // samples on the orbit grid
    double pairing = 1.0;   // (U, u') after normalization

    Vec value(const PeriodicOrbit& orbit, double t) const {
        double tau = std::fmod(t, orbit.period);
        if (tau < 0) tau += orbit.period;
        const int M = static_cast<int>(U.size());
        const double pos = tau / orbit.period * M;
        // cubic is adequate here: U is only used as a projection weight
        const int i1 = static_cast<int>(std::floor(pos)) % M;
        const double x = pos - std::floor(pos);
        const int i0 = (i1 + M - 1) % M, i2 = (i1 + 1) % M, i3 = (i1 + 2) % M;
        Vec out(U[0].size());
        for (Eigen::Index n = 0; n < out.size(); ++n) {
            const double p0 = U[i0][n], p1 = U[i1][n], p2 = U[i2][n], p3 = U[i3][n];
            out[n] = p1 + 0.5 * x * (p2 - p0 +
                     x * (2 * p0 - 5 * p1 + 4 * p2 - p3 +
                     x * (3 * (p1 - p2) + p3 - p0)));
        }
        return out;
    }
};

inline AdjointSolution adjoint_solution(const KineticsModel& model,
                                        const PeriodicOrbit& orbit,
                                        const OdeOptions& opts = {}) {
    const int N = model.dim;
    // forward integration of the adjoint amplifies any component off the
    // neutral eigenvector by the inverse stable multipliers, so both the
    // period map and the eigenvector need extra accuracy here
    OdeOptions tight = opts;
    tight.abs_tol = std::min(opts.abs_tol, 1e-14);
    tight.rel_tol = std::min(opts.rel_tol, 1e-12);
    const Mat F0 =
        monodromy(model, orbit, DiffusionMatrix(Mat::Identity(N, N)), 0.0, tight).F;

    // the neutral multiplier of F0 must be simple
    Eigen::EigenSolver<Mat> es(F0.transpose());
    int near_one = 0, pick = -1;
    for (Eigen::Index i = 0; i < N; ++i) {
        if (std::abs(es.eigenvalues()[i] - 1.0) < 1e-6) {
            ++near_one;
            pick = static_cast<int>(i);
        }
    }
    if (near_one == 0) throw NonSimpleNeutralMode("no Floquet multiplier 1 at k = 0");
    if (near_one > 1)
        throw NonSimpleNeutralMode("Floquet multiplier 1 is not simple at k = 0");

    Vec U0 = es.eigenvectors().col(pick).real();
    if (U0.norm() < 1e-12) throw NonSimpleNeutralMode("degenerate adjoint eigenvector");
    // power iteration with F0^T contracts eigensolver noise off the
    // multiplier-1 direction
    for (int it = 0; it < 2; ++it) {
        U0 = F0.transpose() * U0;
        U0.normalize();
    }

    // advance -U' = f'(u_*)^T U together with the orbit state
    const int M = orbit.samples;
    AdjointSolution adj;
    adj.U.resize(M);
    Eigen::VectorXd y(2 * N);
    y.head(N) = orbit.u[0];
    y.tail(N) = U0;
    Vec fu(N);
    Mat J(N, N);
    auto rhs = [&](double, const Eigen::VectorXd& z, Eigen::VectorXd& dz) {
        const Vec zu = z.head(N);
        model.f(zu, fu);
        if (model.jacobian)
            model.jacobian(zu, J);
        else
            J = fd_jacobian(model, zu);
        dz.head(N) = fu;
        dz.tail(N).noalias() = -J.transpose() * z.tail(N);
    };
    const double c0 = U0.dot(orbit.du[0]);
    if (std::abs(c0) < 1e-12)
        throw NonSimpleNeutralMode("adjoint eigenvector orthogonal to the orbit tangent");
    const double dt = orbit.period / M;
    for (int i = 0; i < M; ++i) {
        adj.U[i] = y.tail(N) / c0;
        if (i + 1 < M) integrate(rhs, 0.0, dt, y, tight);
    }
    return adj;
}

/// Phase-diffusion coefficient by trapezoid quadrature on the periodic
/// orbit grid: ratio of the two adjoint pairings.
inline double compute_d0(const PeriodicOrbit& orbit, const AdjointSolution& adjoint,
                         const DiffusionMatrix& diffusion) {
    double num = 0.0, den = 0.0;
    const int M = orbit.samples;
    for (int i = 0; i < M; ++i) {
        num += adjoint.U[i].dot(diffusion.D * orbit.du[i]);
        den += adjoint.U[i].dot(orbit.du[i]);
    }
    return num / den;
}

/// Least-squares fit of Re lambda_1(k) = -d0 k^2 - c4 k^4 - c6 k^6 on the
/// small-k window; returns the fitted d0. The k^6 term absorbs the next
/// truncation order so the window can stay wide enough for conditioning.
inline double fit_curvature(const FloquetBranch& neutral_branch, double k_max_fit) {
    std::vector<double> ks, re;
    for (std::size_t i = 0; i < neutral_branch.k.size(); ++i)
        if (neutral_branch.k[i] <= k_max_fit) {
            ks.push_back(neutral_branch.k[i]);
            re.push_back(neutral_branch.lambda[i].real());
        }
    if (ks.size() < 4)
        throw InsufficientPoints("fewer than 4 grid points in the curvature-fit window");
    Eigen::MatrixXd A(ks.size(), 3);
    Eigen::VectorXd b(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const double k2 = ks[i] * ks[i];
        A(i, 0) = -k2;
        A(i, 1) = -k2 * k2;
        A(i, 2) = -k2 * k2 * k2;
        b[i] = re[i];
    }
    Eigen::Vector3d coef = A.colPivHouseholderQr().solve(b);
    return coef[0];
}

enum class Verdict { Stable, SidebandUnstable, TuringUnstable, OdeUnstable, Marginal };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Stable: return "Stable";
        case Verdict::SidebandUnstable: return "SidebandUnstable";
        case Verdict::TuringUnstable: return "TuringUnstable";
        case Verdict::OdeUnstable: return "OdeUnstable";
        case Verdict::Marginal: return "Marginal";
    }
    return "?";
}

struct ClassifyTolerances {
    double re_tol = 1e-6;   // band around Re lambda = 0
    double d0_tol = 1e-8;   // band around d0 = 0
    double k_cut = 1e-3;    // smallest k that counts as "finite wavenumber"
};

struct StabilityReport {
    Verdict verdict = Verdict::Marginal;
    double d0 = 0.0;                  // quadrature value
    double d0_fit = 0.0;              // curvature fit
    std::optional<double> d0_formula; // closed form, when the model has oracles
    double max_re_nonneutral = 0.0;   // over the grid, excluding the k=0 neutral exponent
    std::optional<double> k_star;     // most unstable wavenumber, when unstable
    bool hyp_spectrum_ok = false;     // marginal-spectrum condition (i)
    bool hyp_curvature_ok = false;    // d0 > 0 condition (ii)
    ClassifyTolerances tolerances{};
    DiffusionClass diffusion_class = DiffusionClass::SymmetricPositive;
};

/// Stability verdict from a tracked sweep and the quadrature d0.
inline StabilityReport classify(const std::vector<FloquetBranch>& sweep, double d0,
                                const ClassifyTolerances& tol = {}) {
    if (sweep.empty()) throw Error("empty sweep");
    const FloquetBranch* neutral = nullptr;
    for (const auto& b : sweep)
        if (b.neutral) neutral = &b;
    if (!neutral) throw GridTooCoarse("neutral branch not identified");
    if (std::abs(neutral->lambda.front()) > 1e-6)
        throw GridTooCoarse("neutral exponent at k = 0 is not numerically zero");

    StabilityReport rep;
    rep.d0 = d0;
    rep.tolerances = tol;

    // The neutral branch approaches 0 like -d0 k^2 as k -> 0, so its small-k
    // points are excluded from the extremum: they sit inside the tolerance
    // band for any valid orbit. With d0 > 0 the exclusion window is where
    // the parabola itself is unresolved against re_tol.
    const double k_excl =
        (d0 > tol.d0_tol) ? std::sqrt(10.0 * tol.re_tol / d0) : tol.k_cut;
    double worst = -std::numeric_limits<double>::infinity();
    double worst_k = 0.0;
    for (const auto& b : sweep)
        for (std::size_t i = 0; i < b.k.size(); ++i) {
            if (b.neutral && (i == 0 || b.k[i] <= k_excl)) continue;
            if (b.lambda[i].real() > worst) {
                worst = b.lambda[i].real();
                worst_k = b.k[i];
            }
        }
    rep.max_re_nonneutral = worst;

    // ODE-level instability: a non-neutral exponent at k = 0 in the closed
    // right half plane
    bool ode_unstable = false;
    for (const auto& b : sweep)
        if (!b.neutral && b.lambda.front().real() >= tol.re_tol) ode_unstable = true;

    rep.hyp_spectrum_ok = !ode_unstable;
    rep.hyp_curvature_ok = d0 > tol.d0_tol;

    if (ode_unstable) {
        rep.verdict = Verdict::OdeUnstable;
        rep.k_star = 0.0;
        return rep;
    }
    if (std::abs(d0) <= tol.d0_tol) {
        rep.verdict = Verdict::Marginal;
        return rep;
    }
    if (d0 < 0.0) {
        rep.verdict = Verdict::SidebandUnstable;
        rep.k_star = worst_k;
        return rep;
    }
    if (worst > tol.re_tol && worst_k > tol.k_cut) {
        rep.verdict = Verdict::TuringUnstable;
        rep.k_star = worst_k;
        return rep;
    }
    if (std::abs(worst) <= tol.re_tol) {
        rep.verdict = Verdict::Marginal;
        return rep;
    }
    rep.verdict = Verdict::Stable;
    return rep;
}

/// Rank-one spectral projection onto the leading (neutral) eigenspace of
/// the period map, P = r l^T / (l^T r), plus the neutral multiplier.
inline std::pair<Mat, double> neutral_projection(const Monodromy& m) {
    Eigen::EigenSolver<Mat> right(m.F), left(m.F.transpose());
    const int N = static_cast<int>(m.F.rows());
    auto leading = [N](const Eigen::EigenSolver<Mat>& es) {
        int best = 0;
        for (int i = 1; i < N; ++i)
            if (std::abs(es.eigenvalues()[i]) > std::abs(es.eigenvalues()[best])) best = i;
        return best;
    };
    const int ir = leading(right), il = leading(left);
    const Cplx mu = right.eigenvalues()[ir];
    if (std::abs(mu.imag()) > 1e-10 * (1.0 + std::abs(mu.real())))
        throw NonSimpleNeutralMode("leading multiplier is not real");
    double gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < N; ++i)
        if (i != ir) gap = std::min(gap, std::abs(right.eigenvalues()[i] - mu));
    if (gap < 1e-6)
        throw NonSimpleNeutralMode("leading multiplier not separated from the rest");
    const Vec r = right.eigenvectors().col(ir).real();
    const Vec l = left.eigenvectors().col(il).real();
    const double s = l.dot(r);
    if (std::abs(s) < 1e-12) throw NonSimpleNeutralMode("degenerate left/right pairing");
    return {Mat((r * l.transpose()) / s), mu.real()};
}

} // namespace floqrd
