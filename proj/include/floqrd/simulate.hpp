#pragma once

#include <fftw3.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include "floqrd/floquet.hpp"

namespace floqrd {

/// Periodic box [-L, L)^n truncating R^n, M points per dimension.
struct Grid {
    int dim;   // n in {1, 2}
    double L;  // half-width
    int M;     // points per dimension, power of two

    Grid(int dim_, double L_, int M_) : dim(dim_), L(L_), M(M_) {
        if (dim != 1 && dim != 2) throw Error("grid dimension must be 1 or 2");
        if (!(L > 0)) throw Error("grid half-width must be positive");
        if (M < 16 || (M & (M - 1)) != 0)
            throw Error("points per dimension must be a power of two >= 16");
    }

    long points() const { return dim == 1 ? M : long(M) * M; }
    double dx() const { return 2.0 * L / M; }
    double cell() const { return dim == 1 ? dx() : dx() * dx(); }
    double coord(int i) const { return -L + dx() * i; }
    /// wavenumber of FFT bin index m (wrapped): k = pi * m_signed / L
    double wavenumber(int m) const {
        const int ms = (m <= M / 2) ? m : m - M;
        return M_PI * ms / L;
    }
};

/// Grid values of an N-component field, one plane per component.
struct FieldState {
    double t = 0.0;
    Grid grid;
    std::vector<Eigen::ArrayXd> comps;

    FieldState(const Grid& g, int ncomp) : grid(g), comps(ncomp, Eigen::ArrayXd::Zero(g.points())) {}

    int ncomp() const { return static_cast<int>(comps.size()); }

    double max_abs() const {
        double m = 0.0;
        for (long i = 0; i < grid.points(); ++i) {
            double s = 0.0;
            for (const auto& c : comps) s += c[i] * c[i];
            m = std::max(m, s);
        }
        return std::sqrt(m);
    }
};

struct Norms {
    double l1 = 0, l2 = 0, linf = 0;
};

/// L^1, L^2, L^inf of the pointwise Euclidean norm, trapezoid quadrature
/// (plain cell sum on the periodic grid).
inline Norms field_norms(const FieldState& s) {
    Norms n;
    const double cell = s.grid.cell();
    for (long i = 0; i < s.grid.points(); ++i) {
        double q = 0.0;
        for (const auto& c : s.comps) q += c[i] * c[i];
        const double a = std::sqrt(q);
        n.l1 += a;
        n.l2 += q;
        n.linf = std::max(n.linf, a);
    }
    n.l1 *= cell;
    n.l2 = std::sqrt(n.l2 * cell);
    return n;
}

enum class PerturbationShape { GaussianBump, File };

struct PerturbationSpec {
    PerturbationShape shape = PerturbationShape::GaussianBump;
    double amplitude = 1e-2;
    double width = 2.0;
    Vec direction;             // in R^N
    std::vector<double> center; // in the box, per dimension
    std::string file;          // snapshot path for shape = File
};

enum class Scheme { Strang, Lie };

struct SimConfig {
    double dt = 0.01;
    double t_end = 500.0;
    double snapshot_dt = 25.0; // cadence for stored snapshots
    double record_dt = 0.25;   // cadence for the norm series
    Scheme scheme = Scheme::Strang;
    bool dealias = true;
    double blowup_threshold = 1e6;
};

// ---------------------------------------------------------------------------
// spectral workspace

namespace detail {

struct FftwDeleter {
    void operator()(double* p) const { fftw_free(p); }
    void operator()(fftw_complex* p) const { fftw_free(p); }
};

/// FFT scratch plus per-mode diffusion propagators e^{-k^2 D dt}.
class SpectralWorkspace {
  public:
    SpectralWorkspace(const Grid& g, int ncomp)
        : grid_(g), ncomp_(ncomp), nmodes_(g.dim == 1 ? g.M / 2 + 1 : long(g.M) * (g.M / 2 + 1)),
          real_(fftw_alloc_real(g.points())),
          cplx_(fftw_alloc_complex(nmodes_)) {
        if (g.dim == 1) {
            fwd_ = fftw_plan_dft_r2c_1d(g.M, real_.get(), cplx_.get(), FFTW_MEASURE);
            bwd_ = fftw_plan_dft_c2r_1d(g.M, cplx_.get(), real_.get(), FFTW_MEASURE);
        } else {
            fwd_ = fftw_plan_dft_r2c_2d(g.M, g.M, real_.get(), cplx_.get(), FFTW_MEASURE);
            bwd_ = fftw_plan_dft_c2r_2d(g.M, g.M, cplx_.get(), real_.get(), FFTW_MEASURE);
        }
        spectra_.assign(ncomp_, Eigen::ArrayXcd(nmodes_));
    }
    ~SpectralWorkspace() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }
    SpectralWorkspace(const SpectralWorkspace&) = delete;
    SpectralWorkspace& operator=(const SpectralWorkspace&) = delete;

    /// |k|^2 of flattened mode index.
    double k2(long mode) const {
        if (grid_.dim == 1) {
            const double k = M_PI * mode / grid_.L; // r2c modes are 0..M/2
            return k * k;
        }
        const int my = static_cast<int>(mode / (grid_.M / 2 + 1));
        const int mx = static_cast<int>(mode % (grid_.M / 2 + 1));
        const double kx = M_PI * mx / grid_.L;
        const double ky = grid_.wavenumber(my);
        return kx * kx + ky * ky;
    }

    bool aliased(long mode) const {
        const int cut = grid_.M / 3;
        if (grid_.dim == 1) return mode > cut;
        const int my = static_cast<int>(mode / (grid_.M / 2 + 1));
        const int mx = static_cast<int>(mode % (grid_.M / 2 + 1));
        const int mys = (my <= grid_.M / 2) ? my : my - grid_.M;
        return mx > cut || std::abs(mys) > cut;
    }

    void forward(const std::vector<Eigen::ArrayXd>& comps) {
        for (int c = 0; c < ncomp_; ++c) {
            std::memcpy(real_.get(), comps[c].data(), sizeof(double) * grid_.points());
            fftw_execute_dft_r2c(fwd_, real_.get(), cplx_.get());
            for (long m = 0; m < nmodes_; ++m)
                spectra_[c][m] = Cplx(cplx_.get()[m][0], cplx_.get()[m][1]);
        }
    }

    void backward(std::vector<Eigen::ArrayXd>& comps) {
        const double scale = 1.0 / static_cast<double>(grid_.points());
        for (int c = 0; c < ncomp_; ++c) {
            for (long m = 0; m < nmodes_; ++m) {
                cplx_.get()[m][0] = spectra_[c][m].real();
                cplx_.get()[m][1] = spectra_[c][m].imag();
            }
            fftw_execute_dft_c2r(bwd_, cplx_.get(), real_.get());
            for (long i = 0; i < grid_.points(); ++i) comps[c][i] = real_.get()[i] * scale;
        }
    }

    /// Rebuilds the per-mode propagator table when D or dt changes.
    void prepare_diffusion(const Mat& D, double dt) {
        if (prepared_ && dt == prep_dt_ && (D - prep_D_).norm() == 0.0) return;
        prop_.resize(nmodes_);
        for (long m = 0; m < nmodes_; ++m) prop_[m] = Mat((-k2(m) * dt) * D).exp();
        prepared_ = true;
        prep_dt_ = dt;
        prep_D_ = D;
    }

    /// Applies e^{-k^2 D dt} mode by mode; exact for the diffusion sub-flow.
    void diffuse(bool dealias) {
        Eigen::VectorXcd v(ncomp_), w(ncomp_);
        for (long m = 0; m < nmodes_; ++m) {
            if (dealias && aliased(m)) {
                for (int c = 0; c < ncomp_; ++c) spectra_[c][m] = 0.0;
                continue;
            }
            for (int c = 0; c < ncomp_; ++c) v[c] = spectra_[c][m];
            w.noalias() = prop_[m] * v;
            for (int c = 0; c < ncomp_; ++c) spectra_[c][m] = w[c];
        }
    }

    Eigen::ArrayXcd& spectrum(int comp) { return spectra_[comp]; }
    long modes() const { return nmodes_; }

  private:
    Grid grid_;
    int ncomp_;
    long nmodes_;
    std::unique_ptr<double, FftwDeleter> real_;
    std::unique_ptr<fftw_complex, FftwDeleter> cplx_;
    fftw_plan fwd_{}, bwd_{};
    std::vector<Eigen::ArrayXcd> spectra_;
    std::vector<Mat> prop_;
    bool prepared_ = false;
    double prep_dt_ = 0.0;
    Mat prep_D_;
};

/// One classical RK4 step of size h on u' = f(u), pointwise over the grid.
inline void reaction_rk4(const KineticsModel& model, FieldState& s, double h,
                         std::vector<Eigen::ArrayXd>& k1, std::vector<Eigen::ArrayXd>& k2,
                         std::vector<Eigen::ArrayXd>& k3, std::vector<Eigen::ArrayXd>& k4,
                         std::vector<Eigen::ArrayXd>& tmp) {
    const int N = s.ncomp();
    if (model.f_batch) {
        model.f_batch(s.comps, k1);
        for (int c = 0; c < N; ++c) tmp[c] = s.comps[c] + 0.5 * h * k1[c];
        model.f_batch(tmp, k2);
        for (int c = 0; c < N; ++c) tmp[c] = s.comps[c] + 0.5 * h * k2[c];
        model.f_batch(tmp, k3);
        for (int c = 0; c < N; ++c) tmp[c] = s.comps[c] + h * k3[c];
        model.f_batch(tmp, k4);
        for (int c = 0; c < N; ++c)
            s.comps[c] += (h / 6.0) * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        return;
    }
    Vec u(N), a(N), b(N), cc(N), d(N), probe(N);
    for (long i = 0; i < s.grid.points(); ++i) {
        for (int c = 0; c < N; ++c) u[c] = s.comps[c][i];
        model.f(u, a);
        probe = u + 0.5 * h * a;
        model.f(probe, b);
        probe = u + 0.5 * h * b;
        model.f(probe, cc);
        probe = u + h * cc;
        model.f(probe, d);
        for (int c = 0; c < N; ++c)
            s.comps[c][i] = u[c] + (h / 6.0) * (a[c] + 2 * b[c] + 2 * cc[c] + d[c]);
    }
}

/// RK4 step for v' = A(t) v with the homogeneous matrix A = f'(u_*(t)).
inline void linear_reaction_rk4(const KineticsModel& model, const PeriodicOrbit& orbit,
                                double t0, FieldState& s, double h,
                                std::vector<Eigen::ArrayXd>& k1,
                                std::vector<Eigen::ArrayXd>& k2,
                                std::vector<Eigen::ArrayXd>& k3,
                                std::vector<Eigen::ArrayXd>& k4,
                                std::vector<Eigen::ArrayXd>& tmp) {
    const int N = s.ncomp();
    const double t = s.t;
    Mat A1 = eval_jacobian(model, orbit.value(t0 + t));
    Mat A2 = eval_jacobian(model, orbit.value(t0 + t + 0.5 * h));
    Mat A3 = eval_jacobian(model, orbit.value(t0 + t + h));
    auto apply = [N](const Mat& A, const std::vector<Eigen::ArrayXd>& in,
                     std::vector<Eigen::ArrayXd>& out) {
        for (int r = 0; r < N; ++r) {
            out[r] = A(r, 0) * in[0];
            for (int c = 1; c < N; ++c) out[r] += A(r, c) * in[c];
        }
    };
    apply(A1, s.comps, k1);
    for (int c = 0; c < N; ++c) tmp[c] = s.comps[c] + 0.5 * h * k1[c];
    apply(A2, tmp, k2);
    for (int c = 0; c < N; ++c) tmp[c] = s.comps[c] + 0.5 * h * k2[c];
    apply(A2, tmp, k3);
    for (int c = 0; c < N; ++c) tmp[c] = s.comps[c] + h * k3[c];
    apply(A3, tmp, k4);
    for (int c = 0; c < N; ++c)
        s.comps[c] += (h / 6.0) * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
}

} // namespace detail

// ---------------------------------------------------------------------------
// initial data

inline FieldState build_perturbation(const PerturbationSpec& pert, const Grid& grid,
                                     int ncomp);

/// u(0, x) = u_*(t0) + v0(x).
inline FieldState init_state(const PeriodicOrbit& orbit, double t0,
                             const PerturbationSpec& pert, const Grid& grid) {
    FieldState s = build_perturbation(pert, grid, orbit.dim());
    const Vec base = orbit.value(t0);
    for (int c = 0; c < s.ncomp(); ++c) s.comps[c] += base[c];
    s.t = 0.0;
    return s;
}

// snapshot I/O -------------------------------------------------------------

inline void write_snapshot(const FieldState& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open snapshot file for writing: " + path);
    const char magic[8] = {'R', 'D', 'S', 'N', 'A', 'P', '1', '\0'};
    out.write(magic, 8);
    const std::int64_t n = s.grid.dim, N = s.ncomp(), M = s.grid.M;
    const double L = s.grid.L, t = s.t;
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&N), 8);
    out.write(reinterpret_cast<const char*>(&M), 8);
    out.write(reinterpret_cast<const char*>(&L), 8);
    out.write(reinterpret_cast<const char*>(&t), 8);
    for (const auto& c : s.comps)
        out.write(reinterpret_cast<const char*>(c.data()), sizeof(double) * c.size());
    if (!out) throw Error("snapshot write failed: " + path);
}

inline FieldState read_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open snapshot file: " + path);
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "RDSNAP1\0", 8) != 0)
        throw Error("bad snapshot magic in " + path);
    std::int64_t n, N, M;
    double L, t;
    in.read(reinterpret_cast<char*>(&n), 8);
    in.read(reinterpret_cast<char*>(&N), 8);
    in.read(reinterpret_cast<char*>(&M), 8);
    in.read(reinterpret_cast<char*>(&L), 8);
    in.read(reinterpret_cast<char*>(&t), 8);
    FieldState s(Grid(static_cast<int>(n), L, static_cast<int>(M)), static_cast<int>(N));
    s.t = t;
    for (auto& c : s.comps)
        in.read(reinterpret_cast<char*>(c.data()), sizeof(double) * c.size());
    if (!in) throw Error("snapshot truncated: " + path);
    return s;
}

inline FieldState build_perturbation(const PerturbationSpec& pert, const Grid& grid,
                                     int ncomp) {
    if (pert.shape == PerturbationShape::File) {
        FieldState s = read_snapshot(pert.file);
        if (s.grid.dim != grid.dim || s.grid.M != grid.M || s.ncomp() != ncomp)
            throw Error("perturbation file does not match the grid");
        return s;
    }
    if (pert.width > grid.L / 8.0)
        throw PerturbationTooWide("perturbation width exceeds L/8");
    if (pert.direction.size() != ncomp) throw Error("perturbation direction has wrong size");
    FieldState s(grid, ncomp);
    std::vector<double> center(grid.dim, 0.0);
    for (std::size_t i = 0; i < pert.center.size() && i < center.size(); ++i)
        center[i] = pert.center[i];
    const double s2 = 2.0 * pert.width * pert.width;
    if (grid.dim == 1) {
        for (int i = 0; i < grid.M; ++i) {
            const double r = grid.coord(i) - center[0];
            const double g = pert.amplitude * std::exp(-r * r / s2);
            for (int c = 0; c < ncomp; ++c) s.comps[c][i] = g * pert.direction[c];
        }
    } else {
        for (int iy = 0; iy < grid.M; ++iy)
            for (int ix = 0; ix < grid.M; ++ix) {
                const double rx = grid.coord(ix) - center[0];
                const double ry = grid.coord(iy) - center[1];
                const double g = pert.amplitude * std::exp(-(rx * rx + ry * ry) / s2);
                for (int c = 0; c < ncomp; ++c)
                    s.comps[c][long(iy) * grid.M + ix] = g * pert.direction[c];
            }
    }
    return s;
}

// ---------------------------------------------------------------------------
// time stepping

class Simulator {
  public:
    Simulator(const KineticsModel& model, const DiffusionMatrix& diffusion,
              const Grid& grid)
        : model_(model), D_(diffusion), ws_(grid, model.dim),
          k1_(model.dim, Eigen::ArrayXd(grid.points())), k2_(k1_), k3_(k1_), k4_(k1_),
          tmp_(k1_) {}

    /// One splitting step of the full nonlinear system u_t = D Lap u + f(u).
    void step(FieldState& s, const SimConfig& cfg) {
        advance(s, cfg, false, nullptr, 0.0);
    }

    /// One splitting step of the linearization around the orbit,
    /// v_t = D Lap v + f'(u_*(t0 + t)) v. The state holds v.
    void step_linearized(FieldState& s, const SimConfig& cfg, const PeriodicOrbit& orbit,
                         double t0) {
        advance(s, cfg, true, &orbit, t0);
    }

  private:
    void advance(FieldState& s, const SimConfig& cfg, bool linear,
                 const PeriodicOrbit* orbit, double t0) {
        const double dt = cfg.dt;
        ws_.prepare_diffusion(D_.D, dt);
        const double rdt = (cfg.scheme == Scheme::Strang) ? 0.5 * dt : dt;
        react(s, rdt, linear, orbit, t0);
        ws_.forward(s.comps);
        ws_.diffuse(cfg.dealias);
        ws_.backward(s.comps);
        if (cfg.scheme == Scheme::Strang) {
            s.t += 0.5 * dt; // second reaction half-step starts mid-interval
            react(s, 0.5 * dt, linear, orbit, t0);
            s.t += 0.5 * dt;
        } else {
            s.t += dt;
        }
        double m = 0.0;
        for (const auto& c : s.comps) m = std::max(m, c.abs().maxCoeff());
        if (!(m < cfg.blowup_threshold)) throw BlowUp(s.t);
    }

    void react(FieldState& s, double h, bool linear, const PeriodicOrbit* orbit,
               double t0) {
        if (linear)
            detail::linear_reaction_rk4(model_, *orbit, t0, s, h, k1_, k2_, k3_, k4_, tmp_);
        else
            detail::reaction_rk4(model_, s, h, k1_, k2_, k3_, k4_, tmp_);
    }

    KineticsModel model_;
    DiffusionMatrix D_;
    detail::SpectralWorkspace ws_;
    std::vector<Eigen::ArrayXd> k1_, k2_, k3_, k4_, tmp_;
};

struct NormRecord {
    double t;
    double l1, l2, linf;
    double phase_mass;
};

struct RunResult {
    std::vector<NormRecord> series;
    std::vector<FieldState> snapshots;
};

namespace detail {

inline double phase_mass(const FieldState& v, const PeriodicOrbit& orbit,
                         const AdjointSolution& adj, double t0) {
    const Vec U = adj.value(orbit, t0 + v.t);
    Eigen::ArrayXd alpha = U[0] * v.comps[0];
    for (int c = 1; c < v.ncomp(); ++c) alpha += U[c] * v.comps[c];
    return alpha.sum() * v.grid.cell();
}

template <class Step, class Perturbation>
RunResult run_loop(FieldState& state, const SimConfig& cfg, Step&& do_step,
                   Perturbation&& perturbation_of) {
    RunResult out;
    const long steps = std::lround(cfg.t_end / cfg.dt);
    const long rec_every = std::max<long>(1, std::lround(cfg.record_dt / cfg.dt));
    const long snap_every = std::max<long>(1, std::lround(cfg.snapshot_dt / cfg.dt));
    out.series.push_back(perturbation_of(state));
    out.snapshots.push_back(state);
    for (long i = 1; i <= steps; ++i) {
        do_step(state);
        if (i % rec_every == 0 || i == steps) out.series.push_back(perturbation_of(state));
        if (i % snap_every == 0 || i == steps) out.snapshots.push_back(state);
    }
    return out;
}

} // namespace detail

/// Full nonlinear evolution; the norm series tracks v = u - u_*(t0 + t).
inline RunResult run(FieldState state, const SimConfig& cfg, const KineticsModel& model,
                     const DiffusionMatrix& diffusion, const PeriodicOrbit& orbit,
                     double t0, const AdjointSolution* adjoint = nullptr) {
    Simulator sim(model, diffusion, state.grid);
    FieldState v(state.grid, state.ncomp());
    auto record = [&](const FieldState& s) {
        const Vec base = orbit.value(t0 + s.t);
        v.t = s.t;
        for (int c = 0; c < s.ncomp(); ++c) v.comps[c] = s.comps[c] - base[c];
        const Norms n = field_norms(v);
        const double pm = adjoint ? detail::phase_mass(v, orbit, *adjoint, t0) : 0.0;
        return NormRecord{s.t, n.l1, n.l2, n.linf, pm};
    };
    return detail::run_loop(state, cfg, [&](FieldState& s) { sim.step(s, cfg); }, record);
}

/// Linearized evolution of v itself around the orbit.
inline RunResult linearized_run(FieldState state, const SimConfig& cfg,
                                const KineticsModel& model,
                                const DiffusionMatrix& diffusion,
                                const PeriodicOrbit& orbit, double t0,
                                const AdjointSolution* adjoint = nullptr) {
    Simulator sim(model, diffusion, state.grid);
    auto record = [&](const FieldState& s) {
        const Norms n = field_norms(s);
        const double pm = adjoint ? detail::phase_mass(s, orbit, *adjoint, t0) : 0.0;
        return NormRecord{s.t, n.l1, n.l2, n.linf, pm};
    };
    return detail::run_loop(
        state, cfg, [&](FieldState& s) { sim.step_linearized(s, cfg, orbit, t0); }, record);
}

/// Fourier coefficient (per component) of 1D mode index m, normalized so a
/// field c * exp(i k_m x) has coefficient c.
inline Eigen::VectorXcd mode_coefficient(const FieldState& s, int m) {
    if (s.grid.dim != 1) throw Error("mode_coefficient expects a 1D field");
    Eigen::VectorXcd out(s.ncomp());
    const int M = s.grid.M;
    for (int c = 0; c < s.ncomp(); ++c) {
        Cplx acc = 0.0;
        for (int i = 0; i < M; ++i) {
            const double ph = -2.0 * M_PI * m * i / M;
            acc += s.comps[c][i] * Cplx(std::cos(ph), std::sin(ph));
        }
        out[c] = acc / static_cast<double>(M);
    }
    return out;
}

} // namespace floqrd
