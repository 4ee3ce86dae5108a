#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "floqrd/kinetics.hpp"

using namespace floqrd;

namespace {

ExampleParams params(double eps, double theta, Mat D = Mat::Identity(2, 2)) {
    return ExampleParams{eps, theta, std::move(D)};
}

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

} // namespace

TEST_CASE("on-orbit evaluation: cubic term vanishes at |u| = eps") {
    auto m = make_example_model(params(0.5, 0.0));
    Vec f = m.eval(v2(0.5, 0.0));
    CHECK(f[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(f[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("off-orbit evaluation, hand value") {
    // eps=0.5, theta=0, u=(1,0): f = (0,1) + (0.25-1)(1,0) = (-0.75, 1)
    auto m = make_example_model(params(0.5, 0.0));
    Vec f = m.eval(v2(1.0, 0.0));
    CHECK(f[0] == doctest::Approx(-0.75));
    CHECK(f[1] == doctest::Approx(1.0));
}

TEST_CASE("analytic Jacobian at selected points") {
    auto m = make_example_model(params(0.5, 0.0));
    Mat J = eval_jacobian(m, v2(0.0, 0.0));
    Mat expect = ExampleParams::J() + 0.25 * ExampleParams::R(0.0);
    CHECK((J - expect).norm() == doctest::Approx(0.0).epsilon(1e-14));

    // on-orbit, theta=0: J - 2 u u^T = [[-0.5, -1], [1, 0]]
    Mat J2 = eval_jacobian(m, v2(0.5, 0.0));
    Mat expect2(2, 2);
    expect2 << -0.5, -1, 1, 0;
    CHECK((J2 - expect2).norm() == doctest::Approx(0.0).epsilon(1e-14));

    // determinism
    CHECK((eval_jacobian(m, v2(0.3, -0.2)) - eval_jacobian(m, v2(0.3, -0.2))).norm() == 0.0);
}

TEST_CASE("Jacobian matches central finite differences at random probes") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> eps_d(0.2, 1.0), th_d(-1.2, 1.2);
    for (int trial = 0; trial < 5; ++trial) {
        auto p = params(eps_d(rng), th_d(rng));
        auto m = make_example_model(p);
        std::uniform_real_distribution<double> u_d(-(2 * p.epsilon + 1), 2 * p.epsilon + 1);
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            Vec u = v2(u_d(rng), u_d(rng));
            Mat ja = eval_jacobian(m, u);
            Mat jf = fd_jacobian(m, u);
            worst = std::max(worst, (ja - jf).norm() / std::max(1.0, ja.norm()));
        }
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("oracle orbit satisfies the ODE and lives on the circle") {
    auto m = make_example_model(params(0.5, 0.3));
    const auto& o = *m.oracles;
    CHECK(o.period == doctest::Approx(2 * M_PI));
    double worst = 0.0;
    for (int i = 0; i < 128; ++i) {
        double t = o.period * i / 128;
        CHECK(o.orbit(t).norm() == doctest::Approx(0.5).epsilon(1e-14));
        worst = std::max(worst, (o.orbit_derivative(t) - m.eval(o.orbit(t))).norm());
    }
    CHECK(worst < 1e-12);
    CHECK(o.orbit(0.0)[0] == doctest::Approx(0.5));
    CHECK(o.orbit(0.0)[1] == doctest::Approx(0.0));
}

TEST_CASE("closed-form oracle values") {
    // D = I: Tr(JD) = 0, d0 = 1 for any theta
    CHECK(example_oracles(params(0.7, 0.9)).d0 == doctest::Approx(1.0));
    // lambda2 = -2 eps^2 cos(theta)
    CHECK(example_oracles(params(0.5, 0.0)).lambda2 == doctest::Approx(-0.5));
    // nonsymmetric D, theta = 0.9
    Mat D(2, 2);
    D << 2, 3, 0.5, 1;
    double d0 = example_oracles(params(0.5, 0.9, D)).d0;
    CHECK(d0 == doctest::Approx(0.5 * (3.0 - std::tan(0.9) * 2.5)).epsilon(1e-12));
    CHECK(d0 == doctest::Approx(-0.0752).epsilon(1e-2));
}

TEST_CASE("Tr(JD) equals D12 - D21 for random D") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> d(-5, 5);
    for (int i = 0; i < 50; ++i) {
        Mat D(2, 2);
        D << d(rng), d(rng), d(rng), d(rng);
        CHECK(trace_JD(D) ==
              doctest::Approx((ExampleParams::J() * D).trace()).epsilon(1e-14));
    }
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(make_example_model(params(0.0, 0.0)), Error);
    CHECK_THROWS_AS(make_example_model(params(-0.5, 0.0)), Error);
    CHECK_THROWS_AS(make_example_model(params(0.5, M_PI / 2)), Error);
    CHECK_THROWS_AS(make_example_model(params(0.5, -M_PI / 2)), Error);
    CHECK_NOTHROW(make_example_model(params(0.5, 1.5)));
}

TEST_CASE("diffusion matrix hypothesis classification") {
    CHECK(DiffusionMatrix(Mat::Identity(2, 2)).hypothesis ==
          DiffusionClass::SymmetricPositive);

    Mat mild(2, 2);
    mild << 1, 0.2, -0.2, 1; // antisymmetric part only, symmetric part = I
    CHECK(DiffusionMatrix(mild).hypothesis == DiffusionClass::PositiveSymmetricPart);

    Mat turing(2, 2);
    turing << 4, -6, 0.1, 1; // indefinite symmetric part, spectrum positive
    CHECK(DiffusionMatrix(turing).hypothesis == DiffusionClass::PositiveSpectrum);

    Mat bad(2, 2);
    bad << -1, 0, 0, 1;
    CHECK_THROWS_AS((void)DiffusionMatrix(bad), Error);
}

TEST_CASE("model config block: strict keys and registration hook") {
    auto cfg = config::parse(
        "[model]\ntype = \"example\"\nepsilon = 0.5\ntheta = 0\nD = [[1,0],[0,1]]\n");
    auto m = model_from_config(cfg.block("model"));
    CHECK(m.dim == 2);
    CHECK(m.oracles.has_value());

    auto bad = config::parse(
        "[model]\ntype = \"example\"\nepsilon = 0.5\ntheta = 0\nD = [[1,0],[0,1]]\nfoo = 1\n");
    CHECK_THROWS_AS(model_from_config(bad.block("model")), ConfigError);

    register_model("custom", [](const config::Block&) {
        KineticsModel k;
        k.dim = 2;
        k.f = [](const Vec& u, Vec& out) { out = -u; };
        return k;
    });
    auto custom = config::parse("[model]\ntype = \"custom\"\n");
    CHECK(model_from_config(custom.block("model")).dim == 2);
}

TEST_CASE("batch evaluator agrees with pointwise evaluator") {
    auto m = make_example_model(params(0.5, 0.3));
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> d(-2, 2);
    const int n = 64;
    std::vector<Eigen::ArrayXd> in(2, Eigen::ArrayXd(n)), out(2, Eigen::ArrayXd(n));
    for (int i = 0; i < n; ++i) {
        in[0][i] = d(rng);
        in[1][i] = d(rng);
    }
    m.f_batch(in, out);
    for (int i = 0; i < n; ++i) {
        Vec f = m.eval(v2(in[0][i], in[1][i]));
        CHECK(out[0][i] == doctest::Approx(f[0]).epsilon(1e-14));
        CHECK(out[1][i] == doctest::Approx(f[1]).epsilon(1e-14));
    }
}
