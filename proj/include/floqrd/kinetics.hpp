#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "floqrd/config.hpp"
#include "floqrd/errors.hpp"

namespace floqrd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// How the diffusion matrix relates to the theory's hypotheses:
/// the strict case D = D^T > 0, the relaxed case D + D^T > 0, or merely
/// spec(D) in the open right half plane (enough for the linear analysis
/// to make sense numerically, but outside the stated hypotheses).
enum class DiffusionClass { SymmetricPositive, PositiveSymmetricPart, PositiveSpectrum };

struct DiffusionMatrix {
    Mat D;
    DiffusionClass hypothesis;

    explicit DiffusionMatrix(Mat m) : D(std::move(m)) {
        if (D.rows() != D.cols() || D.rows() < 1)
            throw Error("diffusion matrix must be square");
        const Mat sym = 0.5 * (D + D.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> es(sym);
        const double min_sym = es.eigenvalues().minCoeff();
        if ((D - D.transpose()).norm() < 1e-12 * (1.0 + D.norm()) && min_sym > 0.0) {
            hypothesis = DiffusionClass::SymmetricPositive;
        } else if (min_sym > 0.0) {
            hypothesis = DiffusionClass::PositiveSymmetricPart;
        } else {
            Eigen::EigenSolver<Mat> full(D);
            if (full.eigenvalues().real().minCoeff() <= 0.0)
                throw Error("diffusion matrix must have spectrum in the right half plane");
            hypothesis = DiffusionClass::PositiveSpectrum;
        }
    }
};

inline const char* to_string(DiffusionClass c) {
    switch (c) {
        case DiffusionClass::SymmetricPositive: return "symmetric-positive";
        case DiffusionClass::PositiveSymmetricPart: return "positive-symmetric-part";
        case DiffusionClass::PositiveSpectrum: return "positive-spectrum";
    }
    return "?";
}

/// Parameters of the built-in planar model
///   u_t = D u_xx + J u + (eps^2 - |u|^2) R u,
/// with J the quarter-turn and R the rotation by theta.
struct ExampleParams {
    double epsilon;
    double theta;
    Mat D;

    static Mat J() {
        Mat j(2, 2);
        j << 0, -1, 1, 0;
        return j;
    }
    static Mat R(double theta) {
        Mat r(2, 2);
        r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
        return r;
    }
};

/// Tr(JD) = D12 - D21 for the quarter-turn J.
inline double trace_JD(const Mat& D) { return D(0, 1) - D(1, 0); }

/// Closed-form reference quantities for the built-in model.
struct ExampleOracles {
    double epsilon;
    double theta;
    double period;           // always 2*pi
    double lambda2;          // -eps^2 Tr(R) = -2 eps^2 cos(theta)
    double d0;               // (Tr(D) - tan(theta) Tr(JD)) / 2
    double turing_indicator; // Tr(JD) + 2 sqrt(Det(D))

    Vec orbit(double t) const {
        Vec u(2);
        u << epsilon * std::cos(t), epsilon * std::sin(t);
        return u;
    }
    Vec orbit_derivative(double t) const {
        Vec u(2);
        u << -epsilon * std::sin(t), epsilon * std::cos(t);
        return u;
    }
    /// Bounded adjoint solution R ubar'(t), un-normalized.
    Vec adjoint(double t) const {
        Vec v(2);
        v << -std::sin(t), std::cos(t);
        return ExampleParams::R(theta) * v;
    }
};

struct KineticsModel {
    int dim;
    std::function<void(const Vec&, Vec&)> f;
    std::function<void(const Vec&, Mat&)> jacobian;
    /// Optional fast path: apply f componentwise over arrays of grid values.
    std::function<void(const std::vector<Eigen::ArrayXd>&, std::vector<Eigen::ArrayXd>&)>
        f_batch;
    std::optional<ExampleOracles> oracles;

    Vec eval(const Vec& u) const {
        Vec out(dim);
        f(u, out);
        return out;
    }
};

/// Central finite differences of f; fallback Jacobian and test oracle.
inline Mat fd_jacobian(const KineticsModel& model, const Vec& u, double h = 1e-6) {
    Mat J(model.dim, model.dim);
    Vec up(model.dim), um(model.dim), fp(model.dim), fm(model.dim);
    for (int j = 0; j < model.dim; ++j) {
        up = u;
        um = u;
        up[j] += h;
        um[j] -= h;
        model.f(up, fp);
        model.f(um, fm);
        J.col(j) = (fp - fm) / (2 * h);
    }
    return J;
}

inline Mat eval_jacobian(const KineticsModel& model, const Vec& u) {
    if (model.jacobian) {
        Mat J(model.dim, model.dim);
        model.jacobian(u, J);
        return J;
    }
    return fd_jacobian(model, u);
}

inline ExampleOracles example_oracles(const ExampleParams& p) {
    const double trJD = trace_JD(p.D);
    ExampleOracles o;
    o.epsilon = p.epsilon;
    o.theta = p.theta;
    o.period = 2 * M_PI;
    o.lambda2 = -2.0 * p.epsilon * p.epsilon * std::cos(p.theta);
    o.d0 = 0.5 * (p.D.trace() - std::tan(p.theta) * trJD);
    o.turing_indicator = trJD + 2.0 * std::sqrt(p.D.determinant());
    return o;
}

inline KineticsModel make_example_model(const ExampleParams& p) {
    if (!(p.epsilon > 0.0)) throw Error("epsilon must be positive");
    if (!(p.theta > -M_PI / 2 && p.theta < M_PI / 2))
        throw Error("theta must lie strictly inside (-pi/2, pi/2)");
    const Mat J = ExampleParams::J();
    const Mat R = ExampleParams::R(p.theta);
    const double eps2 = p.epsilon * p.epsilon;

    KineticsModel m;
    m.dim = 2;
    m.f = [J, R, eps2](const Vec& u, Vec& out) {
        out.noalias() = J * u + (eps2 - u.squaredNorm()) * (R * u);
    };
    m.jacobian = [J, R, eps2](const Vec& u, Mat& out) {
        out.noalias() = J + (eps2 - u.squaredNorm()) * R - 2.0 * (R * u) * u.transpose();
    };
    m.f_batch = [J, R, eps2](const std::vector<Eigen::ArrayXd>& in,
                             std::vector<Eigen::ArrayXd>& out) {
        const Eigen::ArrayXd& x = in[0];
        const Eigen::ArrayXd& y = in[1];
        Eigen::ArrayXd amp = eps2 - x.square() - y.square();
        out[0] = J(0, 0) * x + J(0, 1) * y + amp * (R(0, 0) * x + R(0, 1) * y);
        out[1] = J(1, 0) * x + J(1, 1) * y + amp * (R(1, 0) * x + R(1, 1) * y);
    };
    m.oracles = example_oracles(p);
    return m;
}

/// Registration hook for user-supplied kinetics. The built-in "example"
/// model is pre-registered; factories receive the raw [model] block.
using ModelFactory = std::function<KineticsModel(const config::Block&)>;

inline std::map<std::string, ModelFactory>& model_registry() {
    static std::map<std::string, ModelFactory> reg = {
        {"example", [](const config::Block& b) {
             b.reject_unknown({"type", "epsilon", "theta", "D"}, "model");
             ExampleParams p;
             p.epsilon = b.number("epsilon");
             p.theta = b.number("theta");
             auto rows = b.matrix("D");
             if (rows.size() != 2 || rows[0].size() != 2 || rows[1].size() != 2)
                 throw Error("D must be a 2x2 matrix");
             p.D.resize(2, 2);
             p.D << rows[0][0], rows[0][1], rows[1][0], rows[1][1];
             return make_example_model(p);
         }}};
    return reg;
}

inline void register_model(const std::string& name, ModelFactory factory) {
    model_registry()[name] = std::move(factory);
}

inline KineticsModel model_from_config(const config::Block& b) {
    const std::string type = b.text("type");
    auto& reg = model_registry();
    auto it = reg.find(type);
    if (it == reg.end()) throw Error("unknown model type '" + type + "'");
    KineticsModel m = it->second(b);
    if (m.dim < 2) throw Error("kinetics dimension must be at least 2");
    return m;
}

inline DiffusionMatrix diffusion_from_config(const config::Block& b) {
    auto rows = b.matrix("D");
    if (rows.empty()) throw Error("D must be a nonempty matrix");
    Mat D(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw Error("ragged matrix D");
        for (std::size_t c = 0; c < rows[r].size(); ++c) D(r, c) = rows[r][c];
    }
    return DiffusionMatrix(D);
}

} // namespace floqrd
