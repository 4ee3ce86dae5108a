#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "floqrd/kinetics.hpp"
#include "floqrd/ode.hpp"

namespace floqrd {

enum class OrbitInterp { Trigonometric, Cubic };

/// Dense representation of the periodic orbit u_*(t): uniform samples of the
/// state and of its derivative f(u_*(t)), plus an interpolation rule.
class PeriodicOrbit {
  public:
    double period = 0.0;
    double omega = 0.0;
    int samples = 0;
    std::vector<Vec> u;  // u_*(t_i), t_i = i T / M
    std::vector<Vec> du; // f(u_*(t_i))
    OrbitInterp interp = OrbitInterp::Trigonometric;

    int dim() const { return u.empty() ? 0 : static_cast<int>(u.front().size()); }

    /// Call once after filling samples; builds interpolation coefficients.
    void finalize() {
        if (interp == OrbitInterp::Trigonometric) {
            build_fourier(u, cu_);
            build_fourier(du, cdu_);
        }
    }

    Vec value(double t) const { return interpolate(u, cu_, t); }
    Vec derivative(double t) const { return interpolate(du, cdu_, t); }

  private:
    using Cplx = std::complex<double>;
    std::vector<std::vector<Cplx>> cu_, cdu_; // [component][mode]

    void build_fourier(const std::vector<Vec>& s, std::vector<std::vector<Cplx>>& c) const {
        const int M = samples;
        const int N = dim();
        c.assign(N, std::vector<Cplx>(M));
        for (int n = 0; n < N; ++n)
            for (int m = 0; m < M; ++m) {
                Cplx acc = 0.0;
                for (int i = 0; i < M; ++i) {
                    const double ph = -2.0 * M_PI * m * i / M;
                    acc += s[i][n] * Cplx(std::cos(ph), std::sin(ph));
                }
                c[n][m] = acc / static_cast<double>(M);
            }
    }

    Vec interpolate(const std::vector<Vec>& s,
                    const std::vector<std::vector<Cplx>>& c, double t) const {
        const int M = samples;
        double tau = std::fmod(t, period);
        if (tau < 0) tau += period;
        Vec out(dim());
        if (interp == OrbitInterp::Trigonometric) {
            const double phase = omega * tau;
            for (int n = 0; n < dim(); ++n) {
                Cplx acc = c[n][0];
                for (int m = 1; m < M / 2; ++m) {
                    const Cplx e(std::cos(m * phase), std::sin(m * phase));
                    acc += c[n][m] * e + std::conj(c[n][m] * e);
                }
                // Nyquist mode, interpolated as a cosine
                acc += c[n][M / 2] * std::cos((M / 2) * phase);
                out[n] = acc.real();
            }
        } else {
            // periodic Catmull-Rom
            const double pos = tau / period * M;
            const int i1 = static_cast<int>(std::floor(pos)) % M;
            const double x = pos - std::floor(pos);
            const int i0 = (i1 + M - 1) % M, i2 = (i1 + 1) % M, i3 = (i1 + 2) % M;
            for (int n = 0; n < dim(); ++n) {
                const double p0 = s[i0][n], p1 = s[i1][n], p2 = s[i2][n], p3 = s[i3][n];
                out[n] = p1 + 0.5 * x * (p2 - p0 +
                         x * (2 * p0 - 5 * p1 + 4 * p2 - p3 +
                         x * (3 * (p1 - p2) + p3 - p0)));
            }
        }
        return out;
    }
};

namespace detail {

/// Flow map of u' = f(u) over [0, tau].
inline Vec flow(const KineticsModel& model, Vec u0, double tau, const OdeOptions& opts) {
    Vec scratch(model.dim);
    integrate(
        [&](double, const Vec& y, Vec& dy) { model.f(y, dy); }, 0.0, tau, u0, opts);
    return u0;
}

/// Flow of the state together with the fundamental matrix of the
/// variational equation F' = f'(u) F, F(0) = I.
inline void flow_with_variational(const KineticsModel& model, Vec& u, Mat& F, double tau,
                                  const OdeOptions& opts) {
    const int N = model.dim;
    Eigen::VectorXd y(N + N * N);
    y.head(N) = u;
    Eigen::Map<Mat>(y.data() + N, N, N) = F;
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
                J * Eigen::Map<const Mat>(z.data() + N, N, N);
        },
        0.0, tau, y, opts);
    u = y.head(N);
    F = Eigen::Map<Mat>(y.data() + N, N, N);
}

} // namespace detail

struct OrbitOptions {
    int samples = 256;
    int newton_max_iter = 25;
    double tol = 1e-10;              // shooting residual |Phi_T(u0) - u0|
    double closure_tol = 1e-9;
    double minimality_tol = 1e-6;
    OrbitInterp interp = OrbitInterp::Trigonometric;
    OdeOptions ode{};
};

/// Newton shooting for a periodic solution of u' = f(u). The phase is
/// pinned by orthogonality to f(guess_point) through guess_point.
inline PeriodicOrbit find_orbit(const KineticsModel& model, const Vec& guess_point,
                                double guess_period, const OrbitOptions& opts = {}) {
    if (!(guess_period > 0.0)) throw Error("guess period must be positive");
    const int N = model.dim;
    const Vec anchor = guess_point;
    const Vec anchor_dir = model.eval(anchor);
    if (anchor_dir.norm() < 1e-12)
        throw DegenerateOrbit("phase anchor sits at an equilibrium");

    Vec u0 = guess_point;
    double T = guess_period;
    bool converged = false;
    for (int it = 0; it < opts.newton_max_iter; ++it) {
        Vec u = u0;
        Mat F = Mat::Identity(N, N);
        detail::flow_with_variational(model, u, F, T, opts.ode);
        Vec shoot = u - u0;
        const double phase = anchor_dir.dot(u0 - anchor);
        if (shoot.norm() < opts.tol && std::abs(phase) < opts.tol) {
            converged = true;
            break;
        }
        Eigen::MatrixXd Jn(N + 1, N + 1);
        Eigen::VectorXd rn(N + 1);
        Jn.topLeftCorner(N, N) = F - Mat::Identity(N, N);
        Jn.topRightCorner(N, 1) = model.eval(u);
        Jn.bottomLeftCorner(1, N) = anchor_dir.transpose();
        Jn(N, N) = 0.0;
        rn.head(N) = shoot;
        rn[N] = phase;
        Eigen::FullPivLU<Mat> lu(Jn);
        if (lu.rank() < N + 1)
            throw DegenerateOrbit("singular shooting Jacobian beyond the phase degeneracy");
        Eigen::VectorXd delta = lu.solve(rn);
        u0 -= delta.head(N);
        T -= delta[N];
        if (!(T > 0.0)) throw NonConvergence("Newton drove the period non-positive");
    }
    if (!converged) throw NonConvergence("shooting Newton did not converge");

    // minimality heuristic: the orbit must not close after T/2 or T/3
    for (int p : {2, 3}) {
        Vec up = detail::flow(model, u0, T / p, opts.ode);
        if ((up - u0).norm() < opts.minimality_tol)
            throw DegenerateOrbit("period is not minimal (closes after T/" +
                                  std::to_string(p) + ")");
    }

    PeriodicOrbit orbit;
    orbit.period = T;
    orbit.omega = 2 * M_PI / T;
    orbit.samples = opts.samples;
    orbit.interp = opts.interp;
    orbit.u.resize(opts.samples);
    orbit.du.resize(opts.samples);
    Vec u = u0;
    const double dt = T / opts.samples;
    for (int i = 0; i < opts.samples; ++i) {
        orbit.u[i] = u;
        orbit.du[i] = model.eval(u);
        u = detail::flow(model, u, dt, opts.ode);
    }
    if ((u - u0).norm() > opts.closure_tol)
        throw NonConvergence("orbit fails to close after re-integration");
    const double maxspeed =
        [&] {
            double m = 0.0;
            for (const auto& d : orbit.du) m = std::max(m, d.norm());
            return m;
        }();
    if (maxspeed < 1e-6) throw DegenerateOrbit("orbit is an equilibrium");
    orbit.finalize();
    return orbit;
}

/// Max interpolated residual |d/dt u_*(t) - f(u_*(t))| over a fine grid.
inline double orbit_residual(const KineticsModel& model, const PeriodicOrbit& orbit,
                             int refine = 4) {
    double worst = 0.0;
    const int n = orbit.samples * refine;
    for (int i = 0; i < n; ++i) {
        const double t = orbit.period * i / n;
        const Vec d = orbit.derivative(t);
        worst = std::max(worst, (d - model.eval(orbit.value(t))).norm());
    }
    return worst;
}

} // namespace floqrd
