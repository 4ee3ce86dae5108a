#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "floqrd/verify.hpp"

namespace fs = std::filesystem;
using namespace floqrd;

namespace {

constexpr int kExitError = 1;
constexpr int kExitSideband = 10;
constexpr int kExitTuring = 11;
constexpr int kExitOde = 12;
constexpr int kExitMarginal = 13;
constexpr int kExitBlowUp = 20;

int verdict_exit_code(Verdict v) {
    switch (v) {
        case Verdict::Stable: return 0;
        case Verdict::SidebandUnstable: return kExitSideband;
        case Verdict::TuringUnstable: return kExitTuring;
        case Verdict::OdeUnstable: return kExitOde;
        case Verdict::Marginal: return kExitMarginal;
    }
    return kExitError;
}

config::Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return config::parse(buf.str());
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream out(dir / name);
    if (!out) throw Error("cannot write " + (dir / name).string());
    out.precision(15);
    return out;
}

PeriodicOrbit build_orbit(const config::Config& cfg, const KineticsModel& model) {
    OrbitOptions opts;
    Vec guess;
    double period = 0.0;
    if (cfg.has("orbit")) {
        const auto& b = cfg.block("orbit");
        b.reject_unknown({"guess", "period", "samples", "interp", "tol"}, "orbit");
        opts.samples = static_cast<int>(b.number_or("samples", opts.samples));
        opts.tol = b.number_or("tol", opts.tol);
        const std::string interp = b.text_or("interp", "trig");
        if (interp == "cubic")
            opts.interp = OrbitInterp::Cubic;
        else if (interp != "trig")
            throw Error("interp must be 'trig' or 'cubic'");
        if (b.has("guess")) {
            const auto g = b.array("guess");
            guess = Eigen::Map<const Vec>(g.data(), g.size());
        }
        period = b.number_or("period", 0.0);
    }
    if (guess.size() == 0) {
        if (!model.oracles) throw Error("[orbit] guess required for models without oracles");
        guess = model.oracles->orbit(0.0);
        if (period == 0.0) period = model.oracles->period;
    }
    if (period == 0.0) throw Error("[orbit] period required");
    return find_orbit(model, guess, period, opts);
}

AnalysisOptions analysis_options(const config::Config& cfg) {
    AnalysisOptions opts;
    if (cfg.has("floquet")) {
        const auto& b = cfg.block("floquet");
        b.reject_unknown({"k_max", "k_points", "small_k_points", "re_tol", "d0_tol",
                          "k_cut"},
                         "floquet");
        opts.k_max = b.number_or("k_max", opts.k_max);
        opts.k_points = static_cast<int>(b.number_or("k_points", opts.k_points));
        opts.small_k_points =
            static_cast<int>(b.number_or("small_k_points", opts.small_k_points));
        opts.tolerances.re_tol = b.number_or("re_tol", opts.tolerances.re_tol);
        opts.tolerances.d0_tol = b.number_or("d0_tol", opts.tolerances.d0_tol);
        opts.tolerances.k_cut = b.number_or("k_cut", opts.tolerances.k_cut);
    }
    return opts;
}

void write_spectrum_csv(std::ofstream out, const std::vector<FloquetBranch>& sweep) {
    // neutral branch is column 1
    std::vector<const FloquetBranch*> ordered;
    for (const auto& b : sweep)
        if (b.neutral) ordered.push_back(&b);
    for (const auto& b : sweep)
        if (!b.neutral) ordered.push_back(&b);
    out << "k";
    for (std::size_t j = 0; j < ordered.size(); ++j)
        out << ",re_lambda_" << j + 1 << ",im_lambda_" << j + 1;
    out << "\n";
    for (std::size_t i = 0; i < ordered.front()->k.size(); ++i) {
        out << ordered.front()->k[i];
        for (const auto* b : ordered)
            out << "," << b->lambda[i].real() << "," << b->lambda[i].imag();
        out << "\n";
    }
}

void write_report(std::ofstream out, const AnalysisResult& res) {
    const auto& r = res.report;
    out << "verdict: " << to_string(r.verdict) << "\n";
    out << "d0 (quadrature): " << r.d0 << "\n";
    out << "d0 (curvature fit): " << r.d0_fit << "\n";
    if (r.d0_formula) out << "d0 (closed form): " << *r.d0_formula << "\n";
    out << "max Re lambda (non-neutral): " << r.max_re_nonneutral << "\n";
    if (r.k_star) out << "k*: " << *r.k_star << "\n";
    out << "marginal spectrum hypothesis: " << (r.hyp_spectrum_ok ? "ok" : "violated")
        << "\n";
    out << "curvature hypothesis (d0 > 0): " << (r.hyp_curvature_ok ? "ok" : "violated")
        << "\n";
    out << "diffusion class: " << to_string(r.diffusion_class) << "\n";
    for (const auto& note : res.diagnostics.notes) out << "note: " << note << "\n";
}

int cmd_analyze(const config::Config& cfg, const fs::path& out_dir) {
    auto model = model_from_config(cfg.block("model"));
    auto diffusion = diffusion_from_config(cfg.block("model"));
    auto orbit = build_orbit(cfg, model);
    auto res = analyze_stability(model, orbit, diffusion, analysis_options(cfg));
    write_spectrum_csv(open_out(out_dir, "spectrum.csv"), res.sweep);
    write_report(open_out(out_dir, "report.txt"), res);
    std::cout << "verdict: " << to_string(res.report.verdict) << " (d0 = " << res.report.d0
              << ")\n";
    return verdict_exit_code(res.report.verdict);
}

struct AxisSpec {
    std::string param;
    double lo = 0, hi = 0;
    int points = 0;

    double value(int i) const {
        return points < 2 ? lo : lo + (hi - lo) * i / (points - 1);
    }
};

void apply_axis(config::Block& model_block, const AxisSpec& axis, double value) {
    auto set_number = [&](const std::string& key) {
        model_block.entries[key].value = value;
    };
    if (axis.param == "theta" || axis.param == "epsilon") {
        set_number(axis.param);
    } else if (axis.param.size() == 3 && axis.param[0] == 'D') {
        const int r = axis.param[1] - '1', c = axis.param[2] - '1';
        auto rows = model_block.matrix("D");
        if (r < 0 || c < 0 || r >= static_cast<int>(rows.size()) ||
            c >= static_cast<int>(rows[r].size()))
            throw Error("axis '" + axis.param + "' is outside the D matrix");
        rows[r][c] = value;
        model_block.entries["D"].value = rows;
    } else {
        throw Error("unknown sweep parameter '" + axis.param +
                    "' (use theta, epsilon, or Dij)");
    }
}

int cmd_sweep(const config::Config& cfg, const fs::path& out_dir, int threads) {
    const auto& sb = cfg.block("sweep");
    sb.reject_unknown({"axis", "range", "points", "axis2", "range2", "points2"}, "sweep");
    std::vector<AxisSpec> axes;
    for (const auto& [axis_key, range_key, points_key] :
         {std::tuple{"axis", "range", "points"}, {"axis2", "range2", "points2"}}) {
        if (!sb.has(axis_key)) continue;
        AxisSpec a;
        a.param = sb.text(axis_key);
        const auto r = sb.array(range_key);
        if (r.size() != 2) throw Error("sweep range must be [lo, hi]");
        a.lo = r[0];
        a.hi = r[1];
        a.points = static_cast<int>(sb.number(points_key));
        axes.push_back(a);
    }
    if (axes.empty()) throw Error("[sweep] needs at least one axis");

    struct Cell {
        double x = 0, y = 0;
        StabilityReport report;
        bool ok = false;
        std::string error;
    };
    const int nx = axes[0].points;
    const int ny = axes.size() > 1 ? axes[1].points : 1;
    std::vector<Cell> cells(std::max(nx, 0) * std::max(ny, 0));

    auto work = [&](int begin, int end) {
        for (int idx = begin; idx < end; ++idx) {
            const int i = idx / ny, j = idx % ny;
            Cell& cell = cells[idx];
            cell.x = axes[0].value(i);
            try {
                config::Config local = cfg;
                auto& mb = local.blocks.at("model");
                apply_axis(mb, axes[0], cell.x);
                if (axes.size() > 1) {
                    cell.y = axes[1].value(j);
                    apply_axis(mb, axes[1], cell.y);
                }
                auto model = model_from_config(mb);
                auto diffusion = diffusion_from_config(mb);
                auto orbit = build_orbit(local, model);
                cell.report =
                    analyze_stability(model, orbit, diffusion, analysis_options(local))
                        .report;
                cell.ok = true;
            } catch (const std::exception& ex) {
                cell.error = ex.what();
            }
        }
    };
    const int total = static_cast<int>(cells.size());
    threads = std::max(1, std::min(threads, total == 0 ? 1 : total));
    if (threads == 1 || total == 0) {
        work(0, total);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (total + threads - 1) / threads;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(work, std::min(t * chunk, total),
                              std::min((t + 1) * chunk, total));
        for (auto& th : pool) th.join();
    }

    auto out = open_out(out_dir, "atlas.csv");
    out << axes[0].param;
    if (axes.size() > 1) out << "," << axes[1].param;
    out << ",verdict,d0,max_re_lambda,k_star\n";
    for (const auto& cell : cells) {
        if (!cell.ok) throw Error("sweep cell failed: " + cell.error);
        out << cell.x;
        if (axes.size() > 1) out << "," << cell.y;
        out << "," << to_string(cell.report.verdict) << "," << cell.report.d0 << ","
            << cell.report.max_re_nonneutral << ","
            << (cell.report.k_star ? *cell.report.k_star : 0.0) << "\n";
    }
    std::cout << "wrote " << cells.size() << " atlas cells\n";
    return 0;
}

Grid grid_from_config(const config::Config& cfg) {
    const auto& b = cfg.block("grid");
    b.reject_unknown({"n", "L", "M"}, "grid");
    return Grid(static_cast<int>(b.number_or("n", 1)), b.number("L"),
                static_cast<int>(b.number("M")));
}

SimConfig sim_from_config(const config::Config& cfg) {
    SimConfig sim;
    const auto& b = cfg.block("sim");
    b.reject_unknown({"dt", "t_end", "scheme", "dealias", "record_dt", "snapshot_dt", "t0"},
                     "sim");
    sim.dt = b.number_or("dt", sim.dt);
    sim.t_end = b.number_or("t_end", sim.t_end);
    sim.record_dt = b.number_or("record_dt", sim.record_dt);
    sim.snapshot_dt = b.number_or("snapshot_dt", sim.snapshot_dt);
    if (!(sim.dt > 0) || !(sim.t_end > 0)) throw Error("dt and t_end must be positive");
    const std::string scheme = b.text_or("scheme", "strang");
    if (scheme == "lie")
        sim.scheme = Scheme::Lie;
    else if (scheme != "strang")
        throw Error("scheme must be 'strang' or 'lie'");
    sim.dealias = b.boolean_or("dealias", true);
    return sim;
}

PerturbationSpec perturbation_from_config(const config::Config& cfg, int ncomp) {
    PerturbationSpec pert;
    const auto& b = cfg.block("perturbation");
    b.reject_unknown({"shape", "amplitude", "width", "direction", "center", "file"},
                     "perturbation");
    const std::string shape = b.text_or("shape", "gaussian-bump");
    if (shape == "file") {
        pert.shape = PerturbationShape::File;
        pert.file = b.text("file");
        return pert;
    }
    if (shape != "gaussian-bump")
        throw Error("perturbation shape must be 'gaussian-bump' or 'file'");
    pert.amplitude = b.number_or("amplitude", pert.amplitude);
    pert.width = b.number_or("width", pert.width);
    if (b.has("direction")) {
        const auto d = b.array("direction");
        pert.direction = Eigen::Map<const Vec>(d.data(), d.size());
    } else {
        pert.direction = Vec::Zero(ncomp);
        pert.direction[ncomp - 1] = 1.0;
    }
    if (b.has("center")) pert.center = b.array("center");
    return pert;
}

std::string snapshot_name(double t) {
    std::ostringstream os;
    os << "snapshot_t" << t << ".rdsnap";
    return os.str();
}

int cmd_simulate(const config::Config& cfg, const fs::path& out_dir) {
    auto model = model_from_config(cfg.block("model"));
    auto diffusion = diffusion_from_config(cfg.block("model"));
    auto orbit = build_orbit(cfg, model);
    auto adjoint = adjoint_solution(model, orbit);
    const Grid grid = grid_from_config(cfg);
    const SimConfig sim = sim_from_config(cfg);
    const double t0 = cfg.block("sim").number_or("t0", 0.0);
    const PerturbationSpec pert = perturbation_from_config(cfg, model.dim);

    {
        auto out = open_out(out_dir, "orbit.csv");
        out << "t";
        for (int c = 0; c < model.dim; ++c) out << ",u_" << c + 1;
        for (int c = 0; c < model.dim; ++c) out << ",du_" << c + 1;
        out << "\n";
        for (int i = 0; i < orbit.samples; ++i) {
            out << orbit.period * i / orbit.samples;
            for (int c = 0; c < model.dim; ++c) out << "," << orbit.u[i][c];
            for (int c = 0; c < model.dim; ++c) out << "," << orbit.du[i][c];
            out << "\n";
        }
    }

    FieldState v0 = build_perturbation(pert, grid, model.dim);
    const auto alpha_star = predicted_alpha_star(v0, orbit, adjoint, t0);
    const double d0 = compute_d0(orbit, adjoint, diffusion);

    RunResult result;
    int exit_code = 0;
    try {
        result = run(init_state(orbit, t0, pert, grid), sim, model, diffusion, orbit, t0,
                     &adjoint);
    } catch (const BlowUp& ex) {
        std::cout << "blow-up at t = " << ex.time << "\n";
        return kExitBlowUp;
    }

    {
        auto out = open_out(out_dir, "norms.csv");
        out << "t,l1,l2,linf,phase_mass\n";
        for (const auto& r : result.series)
            out << r.t << "," << r.l1 << "," << r.l2 << "," << r.linf << ","
                << r.phase_mass << "\n";
    }
    for (const auto& s : result.snapshots)
        write_snapshot(s, (out_dir / snapshot_name(s.t)).string());

    auto rows = asymptotics_series(result.snapshots, orbit, adjoint, t0,
                                   alpha_star.value, d0);
    {
        auto out = open_out(out_dir, "asymptotics.csv");
        out << "t,alpha_mass,beta_l1,beta_linf_scaled,profile_err_l1,profile_err_linf\n";
        for (const auto& r : rows)
            out << r.t << "," << r.alpha_mass << "," << r.beta_l1 << ","
                << r.beta_linf_scaled << "," << r.profile_err_l1 << ","
                << r.profile_err_linf << "\n";
    }

    // profile dump for the last snapshot with a resolved profile
    if (d0 > 0.0) {
        for (auto it = result.snapshots.rbegin(); it != result.snapshots.rend(); ++it) {
            if (!(it->t > 0.0)) continue;
            try {
                auto ph = extract_phase(*it, orbit, adjoint, t0);
                auto cmp = compare_profile(ph, alpha_star.value, d0);
                auto out = open_out(out_dir, "profile.csv");
                out << "xi,rescaled_alpha,alpha_star_G\n";
                for (std::size_t i = 0; i < cmp.xi.size(); ++i)
                    out << cmp.xi[i] << "," << cmp.rescaled_alpha[i] << ","
                        << cmp.alpha_star_G[i] << "\n";
                break;
            } catch (const Error&) {
                continue;
            }
        }
    }

    // decay diagnostics on the measured series
    std::vector<double> t, linf;
    for (const auto& r : result.series) {
        t.push_back(r.t);
        linf.push_back(r.linf);
    }
    try {
        auto fit = measure_decay(t, linf, std::max(10.0, 0.1 * sim.t_end),
                                 0.8 * sim.t_end);
        std::cout << "Linf decay exponent p = " << fit.exponent << " on ["
                  << fit.t_a << ", " << fit.t_b << "]\n";
    } catch (const Error&) {
        // short runs have no fit window; not an error
    }
    std::cout << "predicted alpha_* = " << alpha_star.value << " +/- " << alpha_star.band
              << ", d0 = " << d0 << "\n";
    return exit_code;
}

int cmd_verify(unsigned seed, const std::string& filter, bool slow,
               const std::string& corrupt) {
    CheckOptions opts;
    opts.seed = seed;
    opts.corrupt = corrupt;
    int failures = 0, ran = 0;
    for (const auto& check : acceptance_checks()) {
        const bool matches = filter.empty() ||
                             check.name.find(filter) != std::string::npos ||
                             check.module.find(filter) != std::string::npos;
        if (!matches) continue;
        if (check.slow && !slow && filter.empty()) continue;
        const auto res = run_check(check, opts);
        ++ran;
        std::printf("[%s] %-20s (%s, %.1fs): %s\n", res.pass ? "PASS" : "FAIL",
                    check.name.c_str(), check.module.c_str(), res.seconds,
                    res.detail.c_str());
        std::fflush(stdout);
        if (!res.pass) ++failures;
    }
    std::printf("%d/%d checks passed\n", ran - failures, ran);
    return failures == 0 ? 0 : kExitError;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Floquet spectra, stability verdicts, and diffusive-decay "
                 "experiments for periodically oscillating reaction-diffusion systems"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", filter, corrupt;
    unsigned seed = 42;
    int threads = 1;
    bool slow = false;

    auto* analyze = app.add_subcommand("analyze", "classify stability, write spectrum");
    analyze->add_option("--config", config_path, "config file")->required();
    analyze->add_option("--out", out_dir, "output directory");

    auto* sweep = app.add_subcommand("sweep", "parameter atlas of verdicts");
    sweep->add_option("--config", config_path, "config file")->required();
    sweep->add_option("--out", out_dir, "output directory");
    sweep->add_option("--threads", threads, "worker threads");

    auto* simulate = app.add_subcommand("simulate", "nonlinear PDE run + asymptotics");
    simulate->add_option("--config", config_path, "config file")->required();
    simulate->add_option("--out", out_dir, "output directory");

    auto* verify = app.add_subcommand("verify", "run the acceptance check suite");
    verify->add_option("--seed", seed, "seed for randomized checks");
    verify->add_option("--filter", filter, "run only checks matching this substring");
    verify->add_flag("--slow", slow, "include slow checks");
    verify->add_option("--corrupt", corrupt, "zero the tolerance of one named check");

    CLI11_PARSE(app, argc, argv);

    try {
        if (analyze->parsed()) return cmd_analyze(load_config(config_path), out_dir);
        if (sweep->parsed()) return cmd_sweep(load_config(config_path), out_dir, threads);
        if (simulate->parsed()) return cmd_simulate(load_config(config_path), out_dir);
        if (verify->parsed()) return cmd_verify(seed, filter, slow, corrupt);
    } catch (const ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return kExitError;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
