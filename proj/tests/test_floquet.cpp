#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "floqrd/analysis.hpp"

using namespace floqrd;

namespace {

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

KineticsModel example(double eps, double theta) {
    return make_example_model(ExampleParams{eps, theta, Mat::Identity(2, 2)});
}

PeriodicOrbit orbit_of(const KineticsModel& m) {
    const double eps = m.oracles->epsilon;
    return find_orbit(m, v2(eps, 0.0), 2 * M_PI);
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = a + (b - a) * i / (n - 1);
    return g;
}

} // namespace

TEST_CASE("monodromy at k = 0: multipliers {1, e^{-pi}}") {
    auto m = example(0.5, 0.0);
    auto orbit = orbit_of(m);
    auto mono = monodromy(m, orbit, DiffusionMatrix(Mat::Identity(2, 2)), 0.0);
    auto mu = floquet_multipliers(mono.F);
    std::sort(mu.begin(), mu.end(),
              [](Cplx a, Cplx b) { return std::abs(a) > std::abs(b); });
    CHECK(std::abs(mu[0] - 1.0) < 1e-8);
    CHECK(std::abs(mu[1] - std::exp(-M_PI)) < 1e-8);
}

TEST_CASE("scalar diffusion factors out: F_k = e^{-k^2 T} F_0") {
    auto m = example(0.5, 0.3);
    auto orbit = orbit_of(m);
    DiffusionMatrix D(Mat::Identity(2, 2));
    const double k = 0.7;
    Mat F0 = monodromy(m, orbit, D, 0.0).F;
    Mat Fk = monodromy(m, orbit, D, k).F;
    CHECK((Fk - std::exp(-k * k * orbit.period) * F0).norm() < 1e-8);
}

TEST_CASE("exponents of the identity monodromy vanish") {
    Monodromy m{0.0, Mat::Identity(3, 3)};
    for (Cplx l : floquet_exponents(m, 2 * M_PI)) CHECK(std::abs(l) < 1e-14);
}

TEST_CASE("exponents of the example at k = 0: {0, -0.5}") {
    auto m = example(0.5, 0.0);
    auto orbit = orbit_of(m);
    auto lam = floquet_exponents(
        monodromy(m, orbit, DiffusionMatrix(Mat::Identity(2, 2)), 0.0), orbit.period);
    CHECK(std::abs(lam[0]) < 1e-8);
    CHECK(std::abs(lam[1] - Cplx(-0.5, 0.0)) < 1e-8);
}

TEST_CASE("eigenvalues recovered from a constructed similarity transform") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> d(-1, 1);
    Mat S(3, 3);
    do {
        for (int i = 0; i < 9; ++i) S(i / 3, i % 3) = d(rng);
    } while (std::abs(S.determinant()) < 0.1);
    Eigen::Vector3d evs(0.9, 0.4, -0.2);
    Mat F = S * evs.asDiagonal() * S.inverse();
    auto lam = floquet_exponents(Monodromy{0.0, F}, 1.0);
    // two real positive multipliers and one negative (log picks up i*pi)
    CHECK(std::abs(lam[0] - std::log(Cplx(0.9))) < 1e-10);
    CHECK(std::abs(lam[1] - std::log(Cplx(0.4))) < 1e-10);
    CHECK(std::abs(lam[2] - std::log(Cplx(-0.2))) < 1e-10);
}

TEST_CASE("strip reduction keeps Im lambda in (-omega/2, omega/2]") {
    const double T = 2 * M_PI; // omega = 1
    Mat F(2, 2);
    F << 0, -1, 1, 0; // multipliers +-i
    for (Cplx l : floquet_exponents(Monodromy{0.0, F}, T)) {
        CHECK(l.imag() > -0.5);
        CHECK(l.imag() <= 0.5);
    }
}

TEST_CASE("zero multiplier reported as -inf sentinel") {
    Mat F(2, 2);
    F << 0, 0, 0, 0.5;
    auto lam = floquet_exponents(Monodromy{0.0, F}, 1.0);
    CHECK(std::isinf(lam.back().real()));
    CHECK(lam.back().real() < 0);
}

TEST_CASE("commuting sweep: lambda_j(k) = lambda_j(0) - k^2 with D = I") {
    auto m = example(0.5, 0.0);
    auto orbit = orbit_of(m);
    auto grid = linspace(0.0, 1.5, 31);
    auto sweep = spectrum_sweep(m, orbit, DiffusionMatrix(Mat::Identity(2, 2)), grid);
    REQUIRE(sweep.size() == 2);
    const FloquetBranch& neutral = sweep[0].neutral ? sweep[0] : sweep[1];
    const FloquetBranch& other = sweep[0].neutral ? sweep[1] : sweep[0];
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double k2 = grid[i] * grid[i];
        CHECK(std::abs(neutral.lambda[i] - Cplx(-k2, 0)) < 1e-8);
        CHECK(std::abs(other.lambda[i] - Cplx(-0.5 - k2, 0)) < 1e-8);
    }
}

TEST_CASE("exponents are conjugate-closed at every k") {
    auto m = example(0.5, 0.4);
    auto orbit = orbit_of(m);
    Mat Dm(2, 2);
    Dm << 2, 3, 0.5, 1;
    auto sweep = spectrum_sweep(m, orbit, DiffusionMatrix(Dm), linspace(0, 1.5, 16));
    for (std::size_t i = 0; i < sweep[0].k.size(); ++i) {
        Cplx a = sweep[0].lambda[i], b = sweep[1].lambda[i];
        const bool both_real =
            std::abs(a.imag()) < 1e-8 && std::abs(b.imag()) < 1e-8;
        const bool conj_pair = std::abs(a - std::conj(b)) < 1e-8 ||
                               std::abs(a.imag() - 0.5 * orbit.omega) < 1e-8;
        CHECK((both_real || conj_pair));
    }
}

TEST_CASE("Turing-type sweep shows interior instability, fixed point oracle") {
    // Tr(JD) + 2 sqrt(Det D) = -6.1 + 2 sqrt(4.6) < 0 with eps small: Turing regime
    auto m = example(0.05, 0.0);
    auto orbit = orbit_of(m);
    Mat Dm(2, 2);
    Dm << 4, -6, 0.1, 1;
    DiffusionMatrix D(Dm);
    auto grid = linspace(0.0, 2.0, 81);
    auto sweep = spectrum_sweep(m, orbit, D, grid);

    double worst = -1e9, worst_k = 0;
    for (const auto& b : sweep)
        for (std::size_t i = 0; i < b.k.size(); ++i)
            if (b.lambda[i].real() > worst && !(b.neutral && i == 0)) {
                worst = b.lambda[i].real();
                worst_k = b.k[i];
            }
    CHECK(worst > 0.0);
    CHECK(worst_k > 0.3);

    // oracle: eigenvalues of J - D k^2 at the most unstable k
    Mat A = ExampleParams::J() - worst_k * worst_k * Dm;
    Eigen::EigenSolver<Mat> es(A);
    CHECK(es.eigenvalues().real().maxCoeff() > 0.0);
}

TEST_CASE("adjoint solution matches R ubar' and pairs to one") {
    const double eps = 0.5, theta = 0.3;
    auto m = example(eps, theta);
    auto orbit = orbit_of(m);
    auto adj = adjoint_solution(m, orbit);
    const Mat R = ExampleParams::R(theta);
    const double norm = eps * std::cos(theta); // (R ubar'(t), eps ubar'(t))
    double worst_pair = 0.0, worst_val = 0.0;
    for (int i = 0; i < orbit.samples; ++i) {
        const double t = orbit.period * i / orbit.samples;
        worst_pair = std::max(worst_pair, std::abs(adj.U[i].dot(orbit.du[i]) - 1.0));
        Vec ubar_p = v2(-std::sin(t), std::cos(t));
        worst_val = std::max(worst_val, (adj.U[i] - R * ubar_p / norm).norm());
    }
    CHECK(worst_pair < 1e-8);
    CHECK(worst_val < 1e-7);
}

TEST_CASE("adjoint satisfies -U' = f'(u_*)^T U (spectral derivative oracle)") {
    auto m = example(0.6, -0.5);
    auto orbit = orbit_of(m);
    auto adj = adjoint_solution(m, orbit);
    const int M = orbit.samples;
    // spectral differentiation of the adjoint samples
    std::vector<Vec> dU(M, Vec::Zero(2));
    for (int n = 0; n < 2; ++n) {
        std::vector<Cplx> c(M);
        for (int k = 0; k < M; ++k) {
            Cplx acc = 0;
            for (int i = 0; i < M; ++i)
                acc += adj.U[i][n] * std::exp(Cplx(0, -2 * M_PI * k * i / M));
            c[k] = acc / double(M);
        }
        for (int i = 0; i < M; ++i) {
            Cplx acc = 0;
            for (int k = -M / 2 + 1; k < M / 2; ++k) {
                int kk = (k + M) % M;
                acc += Cplx(0, k * orbit.omega) * c[kk] *
                       std::exp(Cplx(0, 2 * M_PI * k * i / M));
            }
            dU[i][n] = acc.real();
        }
    }
    double worst = 0.0;
    for (int i = 0; i < M; ++i) {
        Mat J = eval_jacobian(m, orbit.u[i]);
        worst = std::max(worst, (dU[i] + J.transpose() * adj.U[i]).norm());
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("d0 quadrature: identity, closed form, linearity in D") {
    auto m = example(0.5, 0.9);
    auto orbit = orbit_of(m);
    auto adj = adjoint_solution(m, orbit);
    CHECK(compute_d0(orbit, adj, DiffusionMatrix(Mat::Identity(2, 2))) ==
          doctest::Approx(1.0).epsilon(1e-8));

    Mat Dm(2, 2);
    Dm << 2, 3, 0.5, 1;
    const double d0 = compute_d0(orbit, adj, DiffusionMatrix(Dm));
    const double formula = 0.5 * (Dm.trace() - std::tan(0.9) * trace_JD(Dm));
    CHECK(std::abs(d0 - formula) < 1e-6);
    CHECK(compute_d0(orbit, adj, DiffusionMatrix(Mat(3.0 * Dm))) ==
          doctest::Approx(3.0 * d0).epsilon(1e-10));
}

TEST_CASE("curvature fit: synthetic branch and exact quadratic") {
    FloquetBranch b;
    for (int i = 0; i <= 20; ++i) {
        const double k = 0.005 * i;
        b.k.push_back(k);
        b.lambda.push_back(Cplx(-3 * k * k + 7 * k * k * k * k, 0));
    }
    CHECK(fit_curvature(b, 0.1) == doctest::Approx(3.0).epsilon(1e-8));

    auto m = example(0.5, 0.0);
    auto orbit = orbit_of(m);
    auto sweep = spectrum_sweep(m, orbit, DiffusionMatrix(Mat::Identity(2, 2)),
                                make_k_grid(0.5, 40, 20));
    for (const auto& br : sweep)
        if (br.neutral) CHECK(fit_curvature(br, 0.1) == doctest::Approx(1.0).epsilon(1e-6));

    FloquetBranch tiny;
    tiny.k = {0.0, 0.05, 0.2};
    tiny.lambda = {0, 0, 0};
    CHECK_THROWS_AS(fit_curvature(tiny, 0.1), InsufficientPoints);
}

TEST_CASE("classification of the three reference parameter sets") {
    {
        auto m = example(0.5, 0.0);
        auto res = analyze_stability(m, orbit_of(m), DiffusionMatrix(Mat::Identity(2, 2)));
        CHECK(res.report.verdict == Verdict::Stable);
        CHECK(res.report.hyp_spectrum_ok);
        CHECK(res.report.hyp_curvature_ok);
    }
    {
        auto m = example(0.5, 0.9);
        Mat Dm(2, 2);
        Dm << 2, 3, 0.5, 1;
        auto res = analyze_stability(m, orbit_of(m), DiffusionMatrix(Dm));
        CHECK(res.report.verdict == Verdict::SidebandUnstable);
        CHECK(res.report.d0 < 0);
    }
    {
        auto m = example(0.05, 0.0);
        Mat Dm(2, 2);
        Dm << 4, -6, 0.1, 1;
        auto res = analyze_stability(m, orbit_of(m), DiffusionMatrix(Dm));
        CHECK(res.report.verdict == Verdict::TuringUnstable);
        REQUIRE(res.report.k_star.has_value());
        // k*^2 inside the negative-determinant interval of the eps -> 0 oracle
        const double k2 = *res.report.k_star * *res.report.k_star;
        CHECK(1 + trace_JD(Dm) * k2 + Dm.determinant() * k2 * k2 < 0);
    }
}

TEST_CASE("scaling invariance: verdict unchanged under time rescaling") {
    // t -> c t: kinetics c*f, same D scaled exponents; sign structure invariant
    const double c = 2.7;
    auto base = example(0.5, 0.9);
    KineticsModel scaled = base;
    scaled.f = [base, c](const Vec& u, Vec& out) {
        base.f(u, out);
        out *= c;
    };
    scaled.jacobian = [base, c](const Vec& u, Mat& out) {
        base.jacobian(u, out);
        out *= c;
    };
    scaled.oracles.reset();
    Mat Dm(2, 2);
    Dm << 2, 3, 0.5, 1;
    auto orbit_a = find_orbit(base, v2(0.5, 0), 2 * M_PI);
    auto orbit_b = find_orbit(scaled, v2(0.5, 0), 2 * M_PI / c);
    CHECK(orbit_b.period == doctest::Approx(orbit_a.period / c).epsilon(1e-9));
    // D is not rescaled, so exponents scale by c in the reaction part only;
    // compare verdicts with D scaled consistently (x unchanged, t scaled
    // means D -> c D keeps the full PDE equivalent)
    auto res_a = analyze_stability(base, orbit_a, DiffusionMatrix(Dm));
    auto res_b = analyze_stability(scaled, orbit_b, DiffusionMatrix(Mat(c * Dm)));
    CHECK(res_a.report.verdict == res_b.report.verdict);
    CHECK(res_b.report.d0 == doctest::Approx(c * res_a.report.d0).epsilon(1e-6));
}

TEST_CASE("neutral projection: translation eigenvector and idempotency") {
    auto m = example(0.5, 0.3);
    auto orbit = orbit_of(m);
    auto mono = monodromy(m, orbit, DiffusionMatrix(Mat::Identity(2, 2)), 0.0);
    auto [P, mu] = neutral_projection(mono);
    CHECK(mu == doctest::Approx(1.0).epsilon(1e-8));
    CHECK((P * P - P).norm() < 1e-10);
    CHECK(Eigen::FullPivLU<Mat>(P).rank() == 1);
    Vec tangent = orbit.du[0];
    CHECK((P * tangent - tangent).norm() < 1e-8 * tangent.norm());
}

TEST_CASE("diffusive limit of the neutral multiplier powers") {
    // nonsymmetric stable D so the limit is not trivially exact
    auto m = example(0.5, 0.3);
    auto orbit = orbit_of(m);
    Mat Dm(2, 2);
    Dm << 1, 0.4, -0.1, 0.8;
    DiffusionMatrix D(Dm);
    auto adj = adjoint_solution(m, orbit);
    const double d0 = compute_d0(orbit, adj, D);
    const double kappa = 1.0;
    const double target = std::exp(-d0 * kappa * kappa);
    double prev_err = 1e9;
    for (int mm : {64, 256, 1024}) {
        const double k = kappa / std::sqrt(mm * orbit.period);
        auto [P, mu] = neutral_projection(monodromy(m, orbit, D, k));
        const double err = std::abs(std::pow(mu, mm) - target);
        CHECK(err < prev_err);
        prev_err = err;
    }
    CHECK(prev_err < 0.02);
}

TEST_CASE("growth bound shape at small k on the stable example") {
    auto m = example(0.5, 0.0);
    auto orbit = orbit_of(m);
    DiffusionMatrix D(Mat::Identity(2, 2));
    const double d0 = 1.0, logC = 0.1;
    for (double k : {0.05, 0.1, 0.2, 0.3}) {
        auto mono = monodromy(m, orbit, D, k);
        const double rho = std::abs(floquet_multipliers(mono.F)[0]) >
                                   std::abs(floquet_multipliers(mono.F)[1])
                               ? std::abs(floquet_multipliers(mono.F)[0])
                               : std::abs(floquet_multipliers(mono.F)[1]);
        for (int mpow : {1, 4, 16, 64}) {
            const double logrho = mpow * std::log(rho);
            CHECK(logrho <= -0.8 * d0 * k * k * mpow * orbit.period + logC);
        }
    }
}

TEST_CASE("sweep input validation") {
    auto m = example(0.5, 0.0);
    auto orbit = orbit_of(m);
    DiffusionMatrix D(Mat::Identity(2, 2));
    CHECK_THROWS_AS(spectrum_sweep(m, orbit, D, {0.5, 1.0}), Error);
    CHECK_THROWS_AS(spectrum_sweep(m, orbit, D, {0.0, 0.5, 0.5}), Error);
    CHECK_THROWS_AS(monodromy(m, orbit, D, -0.1), Error);
}
