#pragma once

#include <cmath>
#include <set>
#include <vector>

#include "floqrd/floquet.hpp"

namespace floqrd {

/// Uniform grid on [0, k_max] with geometric refinement near k = 0, where
/// the curvature fit needs dense data.
inline std::vector<double> make_k_grid(double k_max, int points = 200,
                                       int small_k_points = 20) {
    std::set<double> g;
    for (int i = 0; i < points; ++i) g.insert(k_max * i / (points - 1));
    const double lo = 1e-3, hi = 0.1;
    for (int i = 0; i < small_k_points; ++i)
        g.insert(lo * std::pow(hi / lo, double(i) / (small_k_points - 1)));
    return {g.begin(), g.end()};
}

struct AnalysisOptions {
    double k_max = 2.0;
    int k_points = 200;
    int small_k_points = 20;
    double extend_threshold = -1.0; // require all Re lambda below this at k_max
    int max_extensions = 8;
    ClassifyTolerances tolerances{};
    OdeOptions ode{};
};

struct AnalysisResult {
    std::vector<FloquetBranch> sweep;
    AdjointSolution adjoint;
    StabilityReport report;
    SweepDiagnostics diagnostics;
};

inline double curvature_fit_window(double d0_guess) {
    return 0.1 / std::sqrt(std::max(std::abs(d0_guess), 0.04));
}

/// Full spectral pipeline: adjoint, d0 quadrature, tracked sweep with
/// automatic k_max extension, curvature fit, verdict.
inline AnalysisResult analyze_stability(const KineticsModel& model,
                                        const PeriodicOrbit& orbit,
                                        const DiffusionMatrix& diffusion,
                                        const AnalysisOptions& opts = {}) {
    AnalysisResult res;
    res.adjoint = adjoint_solution(model, orbit, opts.ode);
    const double d0 = compute_d0(orbit, res.adjoint, diffusion);

    double k_max = opts.k_max;
    for (int ext = 0;; ++ext) {
        auto grid = make_k_grid(k_max, opts.k_points, opts.small_k_points);
        res.sweep = spectrum_sweep(model, orbit, diffusion, grid, opts.ode,
                                   &res.diagnostics);
        double tail_re = -std::numeric_limits<double>::infinity();
        for (const auto& b : res.sweep) tail_re = std::max(tail_re, b.lambda.back().real());
        if (tail_re < opts.extend_threshold || ext >= opts.max_extensions) break;
        k_max *= 1.5;
    }

    res.report = classify(res.sweep, d0, opts.tolerances);
    for (const auto& b : res.sweep)
        if (b.neutral)
            res.report.d0_fit = fit_curvature(b, curvature_fit_window(d0));
    if (model.oracles) {
        const auto& o = *model.oracles;
        res.report.d0_formula =
            0.5 * (diffusion.D.trace() - std::tan(o.theta) * trace_JD(diffusion.D));
    }
    res.report.diffusion_class = diffusion.hypothesis;
    return res;
}

} // namespace floqrd
