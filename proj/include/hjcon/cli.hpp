#ifndef HJCON_CLI_HPP
#define HJCON_CLI_HPP

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hjcon/config.hpp"
#include "hjcon/fixed_point.hpp"
#include "hjcon/hj_limit.hpp"
#include "hjcon/parabolic.hpp"
#include "hjcon/quadratic_oracle.hpp"
#include "hjcon/sweep.hpp"

namespace hjcon::cli {

namespace fs = std::filesystem;

struct hypothesis_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline fs::path resolve_outdir(const std::string& flag_out, const json& cfg) {
    std::string dir = flag_out;
    if (dir.empty() && cfg.contains("output")) dir = cfg["output"].get<std::string>();
    if (dir.empty())
        if (const char* env = std::getenv("HJCON_OUT")) dir = env;
    if (dir.empty()) dir = "hjcon_out";
    fs::create_directories(dir);
    return dir;
}

struct LoadedProblem {
    RateModel model;
    InitialData init;
};

inline LoadedProblem load_problem(const json& cfg) {
    json jm;
    if (cfg.contains("model_file"))
        jm = load_json_file(cfg["model_file"].get<std::string>());
    else if (cfg.contains("model"))
        jm = cfg["model"];
    else
        throw config_error("config needs \"model\" or \"model_file\"");
    RateModel model = model_from_json(jm);
    if (!cfg.contains("init")) throw config_error("config needs \"init\"");
    InitialData init = init_from_json(cfg["init"], model);
    return {std::move(model), std::move(init)};
}

inline Box grid_box(const json& cfg, const RateModel& model, const InitialData& init, double T) {
    if (cfg.contains("grid") && cfg["grid"].contains("lo")) return box_from_json(cfg["grid"]);
    return auto_box(model, init, T);
}

inline std::vector<int> grid_n(const json& cfg, int d, int fallback) {
    if (cfg.contains("grid") && cfg["grid"].contains("n")) {
        auto n = cfg["grid"]["n"].get<std::vector<int>>();
        if (static_cast<int>(n.size()) == 1 && d == 2) n.push_back(n[0]);
        return n;
    }
    return std::vector<int>(d, fallback);
}

// ---------------------------------------------------------------------------
// subcommand bodies

inline int cmd_validate_model(const std::string& path, const std::string& out_flag) {
    const json doc = load_json_file(path);
    const json jm = doc.contains("model") ? doc["model"] : doc;
    const RateModel model = model_from_json(jm);

    Box box;
    if (doc.contains("box")) {
        box = box_from_json(doc["box"]);
    } else {
        Vec lo(model.dim()), hi(model.dim());
        for (int a = 0; a < model.dim(); ++a) {
            lo[a] = model.theta()[a] - 3.0;
            hi[a] = model.theta()[a] + 3.0;
        }
        box = Box(lo, hi);
    }
    const HypothesisReport rep = validate_hypotheses(model, box);

    json out = hypothesis_report_to_json(rep);
    bool init_ok = true;
    if (doc.contains("init")) {
        json jinit;
        try {
            const InitialData init = init_from_json(doc["init"], model);
            jinit["I0"] = init.I0;
            jinit["r"] = init.r;
            jinit["L_constants"] = {{"L0_up", init.L0_up},
                                    {"L1_up", init.L1_up},
                                    {"L0_lo", init.L0_lo},
                                    {"L1_lo", init.L1_lo}};
            jinit["max_u0_is_zero"] = init.is_centered_max_zero();
            if (!init.is_centered_max_zero()) {
                init_ok = false;
                jinit["violation"] = "max u0 != 0 (offset = " + format_double(init.offset) + ")";
            }
        } catch (const std::invalid_argument& e) {
            init_ok = false;
            jinit["violation"] = e.what();
        } catch (const no_positive_root_error& e) {
            init_ok = false;
            jinit["violation"] = e.what();
        }
        jinit["satisfied"] = init_ok;
        out["init"] = jinit;
    }
    out["admissible"] = rep.admissible() && init_ok;

    const fs::path dir = resolve_outdir(out_flag, doc);
    write_json_file((dir / "hypothesis_report.json").string(), out);
    if (!rep.admissible() || !init_ok) {
        std::cerr << "validate-model: hypothesis validation failed";
        for (const auto& e : rep.entries)
            if (!e.satisfied) std::cerr << " [" << e.name << "]";
        if (!init_ok) std::cerr << " [initial_data]";
        std::cerr << "\n";
        return 3;
    }
    std::cout << "validate-model: admissible (report written to "
              << (dir / "hypothesis_report.json").string() << ")\n";
    return 0;
}

inline int cmd_solve_oracle(const json& cfg, const std::string& out_flag, bool plot) {
    auto [model, init] = load_problem(cfg);
    const double T = cfg.value("T", 10.0);
    const double dt = cfg.value("dt", 1e-3);
    const int store_every = cfg.value("sample_every", 10);
    QuadraticOracle oracle(model, init);
    const AnsatzHistory hist = oracle.integrate(T, dt, store_every);
    const TrajectoryRecord rec = oracle.to_trajectory(hist);

    const fs::path dir = resolve_outdir(out_flag, cfg);
    write_oracle_csv((dir / "oracle_trajectory.csv").string(), hist, model);

    json rep;
    rep["T"] = T;
    rep["dt"] = dt;
    rep["final"] = {{"m", to_json(hist.back().m)},
                    {"I", hist.back().I},
                    {"A_min_eig", sym_eig_range(hist.back().A).min}};
    write_json_file((dir / "oracle_report.json").string(), rep);
    if (plot) {
        std::vector<double> ts, Is, xs;
        for (const auto& s : rec.samples) {
            ts.push_back(s.t);
            Is.push_back(s.I);
            xs.push_back(s.x[0]);
        }
        fs::create_directories(dir / "plotdata");
        write_plot_data((dir / "plotdata" / "I_vs_t.dat").string(), ts, Is);
        write_plot_data((dir / "plotdata" / "xbar_vs_t.dat").string(), ts, xs);
    }
    std::cout << "solve-oracle: done, I(T) = " << format_double(hist.back().I) << "\n";
    return 0;
}

inline int cmd_solve_limit(const json& cfg, const std::string& out_flag, bool plot) {
    auto [model, init] = load_problem(cfg);
    LimitConfig lc;
    lc.T = cfg.value("T", 5.0);
    lc.box = grid_box(cfg, model, init, lc.T);
    lc.n = grid_n(cfg, model.dim(), 1801);
    lc.dt = cfg.value("dt", 2e-4);
    lc.sample_every = cfg.value("sample_every", 25);
    lc.proj_threshold = cfg.value("proj_threshold", 1e-3);
    lc.ham = ham_from_json(cfg, "hamiltonian", Hamiltonian::Blended);
    if (cfg.contains("snapshot_times"))
        lc.snapshot_times = cfg["snapshot_times"].get<std::vector<double>>();

    const LimitResult res = solve_limit(model, init, lc);
    const fs::path dir = resolve_outdir(out_flag, cfg);
    write_trajectory_csv((dir / "trajectory.csv").string(), res.record, model.dim());
    for (size_t i = 0; i < res.record.snapshots.size(); ++i)
        write_snapshot_with_sidecar((dir / ("snapshot_" + std::to_string(i))).string(),
                                    res.record.snapshots[i], "u");
    json rep;
    rep["max_constraint_residual"] = res.max_constraint_residual;
    rep["max_R_residual"] = res.max_R_residual;
    rep["projection_events"] = res.record.projection_events;
    rep["projection_times"] = res.projection_times;
    rep["sandwich"] = sandwich_to_json(res.sandwich);
    rep["h"] = res.h;
    rep["dt"] = res.dt;
    write_json_file((dir / "run_report.json").string(), rep);
    if (plot) {
        std::vector<double> ts, Is, xs, cr;
        for (const auto& s : res.record.samples) {
            ts.push_back(s.t);
            Is.push_back(s.I);
            xs.push_back(s.x[0]);
            cr.push_back(s.max_u_residual);
        }
        fs::create_directories(dir / "plotdata");
        write_plot_data((dir / "plotdata" / "I_vs_t.dat").string(), ts, Is);
        write_plot_data((dir / "plotdata" / "xbar_vs_t.dat").string(), ts, xs);
        write_plot_data((dir / "plotdata" / "max_u_vs_t.dat").string(), ts, cr);
    }
    std::cout << "solve-limit: done, |max u| <= " << format_double(res.max_constraint_residual)
              << ", projections = " << res.record.projection_events << "\n";
    return 0;
}

inline int cmd_solve_parabolic(const json& cfg, double eps_flag, const std::string& out_flag,
                               bool plot) {
    auto [model, init] = load_problem(cfg);
    double eps = eps_flag > 0.0 ? eps_flag : cfg.value("eps", 0.05);
    ParabolicConfig pc;
    pc.T = cfg.value("T", 1.0);
    pc.box = grid_box(cfg, model, init, pc.T);
    const double h_target = cfg.value("h_factor", 15.0);
    const int n_auto = std::max(
        201, static_cast<int>(std::ceil(pc.box.extent(0) / (std::sqrt(eps) / h_target))) + 1);
    pc.n = grid_n(cfg, model.dim(), n_auto);
    pc.dt = cfg.value("dt", 0.0);
    pc.sample_every = cfg.value("sample_every", 10);
    pc.ham = ham_from_json(cfg, "hamiltonian", Hamiltonian::Blended);
    if (cfg.contains("snapshot_times"))
        pc.snapshot_times = cfg["snapshot_times"].get<std::vector<double>>();

    const EpsRunResult run = run_parabolic(model, init, eps, pc);
    const fs::path dir = resolve_outdir(out_flag, cfg);
    write_eps_run_csv((dir / "eps_run.csv").string(), run, model.dim());
    for (size_t i = 0; i < run.u_snapshots.size(); ++i)
        write_snapshot_with_sidecar((dir / ("snapshot_u_" + std::to_string(i))).string(),
                                    run.u_snapshots[i], "u_eps");
    json rep;
    rep["eps"] = eps;
    rep["primary"] = run.primary == ParabolicForm::Density ? "density" : "hopf-cole";
    rep["h"] = run.h;
    rep["dt"] = run.dt;
    rep["I_min"] = run.I_min;
    rep["I_max"] = run.I_max_run;
    rep["fitted_C"] = run.fitted_C;
    rep["mass_leak_events"] = run.mass_leak_events;
    rep["cross_check_max_dI"] = run.cross_check_max_dI;
    rep["sandwich"] = sandwich_to_json(run.sandwich);
    write_json_file((dir / "run_report.json").string(), rep);
    if (plot) {
        std::vector<double> ts, Is;
        for (const auto& s : run.series) {
            ts.push_back(s.t);
            Is.push_back(s.I);
        }
        fs::create_directories(dir / "plotdata");
        write_plot_data((dir / "plotdata" / "I_eps_vs_t.dat").string(), ts, Is);
    }
    std::cout << "solve-parabolic: done, I_eps(T) = " << format_double(run.series.back().I)
              << "\n";
    return 0;
}

inline int cmd_fixed_point(const json& cfg, double delta_flag, const std::string& out_flag) {
    auto [model, init] = load_problem(cfg);
    const double delta = delta_flag > 0.0 ? delta_flag : cfg.value("delta", 0.05);
    PhiConfig fc;
    fc.box = grid_box(cfg, model, init, delta);
    fc.n = grid_n(cfg, model.dim(), 901);
    fc.ball_radius = cfg.value("ball_radius", 0.2);
    fc.ham = ham_from_json(cfg, "hamiltonian", Hamiltonian::Central);
    const int n_samples = cfg.value("path_samples", 51);
    const int k_max = cfg.value("k_max", 30);
    const double tol = cfg.value("tol", 1e-10);
    const int n_pairs = cfg.value("pairs", 20);
    const unsigned seed = cfg.value("seed", 20240501u);

    const TraitPath start = TraitPath::constant(init.m0, delta, n_samples);
    const PicardResult pic = iterate_Phi(model, start, init, fc, k_max, tol);

    json rep;
    rep["delta"] = delta;
    rep["converged"] = pic.converged;
    rep["iterations"] = pic.distances.size();
    rep["iterate_distances"] = pic.distances;

    json contraction = json::array();
    for (double dd : {0.5 * delta, delta, 2.0 * delta}) {
        const ContractionStats st =
            measure_contraction(model, init, fc, init.m0, dd, n_samples, n_pairs, seed);
        contraction.push_back({{"delta", dd},
                               {"max_factor", st.max_factor},
                               {"median_factor", st.median_factor},
                               {"factors", st.factors}});
    }
    rep["contraction"] = contraction;

    const fs::path dir = resolve_outdir(out_flag, cfg);
    write_json_file((dir / "fixed_point_report.json").string(), rep);
    std::cout << "fixed-point: converged = " << (pic.converged ? "yes" : "no")
              << ", iterations = " << pic.distances.size() << "\n";
    return 0;
}

inline int cmd_lipschitz_probe(const json& cfg, const std::string& out_flag) {
    auto [model, init] = load_problem(cfg);
    const double delta = cfg.value("delta", 0.1);
    PhiConfig fc;
    fc.box = grid_box(cfg, model, init, delta);
    fc.n = grid_n(cfg, model.dim(), 901);
    fc.ham = ham_from_json(cfg, "hamiltonian", Hamiltonian::Central);
    const int n_samples = cfg.value("path_samples", 51);
    const int n_pairs = cfg.value("pairs", 5);
    const unsigned seed = cfg.value("seed", 777u);

    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> base(0.3, 0.7), ampd(0.02, 0.15), phase(0.0, 6.28);
    // shape in rescaled time s = t/delta, so delta-halvings probe the same
    // path shape on shrinking windows
    auto shaped_resource = [&](double b, double a, double ph, double dd) {
        ResourcePath p;
        p.delta = dd;
        p.I.resize(n_samples);
        for (int k = 0; k < n_samples; ++k) {
            const double s = static_cast<double>(k) / (n_samples - 1);
            p.I[k] = std::clamp(b + a * std::sin(2.0 * std::numbers::pi * s + ph), 0.05,
                                0.95 * model.I_max());
        }
        return p;
    };

    json pairs = json::array();
    for (int p = 0; p < n_pairs; ++p) {
        const double b1 = base(rng), a1 = ampd(rng), ph1 = phase(rng);
        const double b2 = base(rng), a2 = ampd(rng), ph2 = phase(rng);
        json jp;
        jp["ratios"] = json::array();
        for (double dd : {delta, 0.5 * delta, 0.25 * delta}) {
            const ResourcePath a = shaped_resource(b1, a1, ph1, dd);
            const ResourcePath b = shaped_resource(b2, a2, ph2, dd);
            const LipschitzProbeResult r = lipschitz_probe(model, a, b, init, fc);
            jp["ratios"].push_back({{"delta", dd}, {"ratio", r.ratio}, {"w2_norm", r.w2_norm}});
        }
        // characteristics cross-check at full delta
        const ResourcePath I1 = shaped_resource(b1, a1, ph1, delta);
        const ResourcePath I2 = shaped_resource(b2, a2, ph2, delta);
        const std::vector<GridField> v1 = solve_v(model, I1, init, fc);
        const std::vector<GridField> v2 = solve_v(model, I2, init, fc);
        const CharacteristicsResult ch =
            solve_transport_characteristics(model, v1, v2, I1, I2, n_samples - 1);
        double agree = 0.0;
        const GridField& rT = ch.r.back();
        for (long k = 0; k < rT.size(); ++k) {
            if (rT.on_boundary(k)) continue;
            agree = std::max(agree, std::abs(rT[k] - (v1.back()[k] - v2.back()[k])));
        }
        jp["characteristics_vs_direct_sup"] = agree;
        jp["characteristic_clips"] = ch.clipped;
        pairs.push_back(jp);
    }
    json rep;
    rep["delta"] = delta;
    rep["pairs"] = pairs;
    const fs::path dir = resolve_outdir(out_flag, cfg);
    write_json_file((dir / "lipschitz_report.json").string(), rep);
    std::cout << "lipschitz-probe: " << n_pairs << " pairs written\n";
    return 0;
}

inline int cmd_sweep(const json& cfg, const std::string& out_flag, bool plot) {
    auto [model, init] = load_problem(cfg);
    SweepConfig sc;
    if (cfg.contains("eps_ladder")) sc.eps_ladder = cfg["eps_ladder"].get<std::vector<double>>();
    if (cfg.contains("t_star")) sc.t_star = cfg["t_star"].get<std::vector<double>>();
    sc.grid_h_factor = cfg.value("h_factor", 15.0);
    sc.sample_every = cfg.value("sample_every", 5);
    sc.concurrent = cfg.value("concurrent", true);
    if (cfg.contains("grid") && cfg["grid"].contains("lo")) sc.box = box_from_json(cfg["grid"]);

    const SweepReport rep = sweep(model, init, sc);
    const fs::path dir = resolve_outdir(out_flag, cfg);
    write_json_file((dir / "sweep_report.json").string(), sweep_report_to_json(rep));
    for (size_t i = 0; i < rep.runs.size(); ++i)
        write_eps_run_csv((dir / ("eps_run_" + std::to_string(i) + ".csv")).string(),
                          rep.runs[i], model.dim());
    if (!rep.complete()) {
        std::cerr << "sweep: sub-run failure";
        for (const auto& [eps, why] : rep.failures)
            std::cerr << " [eps = " << format_double(eps) << ": " << why << "]";
        std::cerr << " (partial artifacts retained)\n";
        return 2;
    }
    if (plot) {
        fs::create_directories(dir / "plotdata");
        for (size_t q = 0; q < rep.t_star.size(); ++q) {
            std::vector<double> eps, Ie, xe, ue;
            for (const auto& ent : rep.entries)
                if (ent.t_star == rep.t_star[q]) {
                    eps.push_back(ent.eps);
                    Ie.push_back(ent.I_err_abs);
                    xe.push_back(ent.x_err_abs);
                    ue.push_back(ent.u_err_sup);
                }
            const std::string tag = "_t" + std::to_string(q);
            write_plot_data((dir / "plotdata" / ("I_err_vs_eps" + tag + ".dat")).string(), eps, Ie);
            write_plot_data((dir / "plotdata" / ("x_err_vs_eps" + tag + ".dat")).string(), eps, xe);
            write_plot_data((dir / "plotdata" / ("u_err_vs_eps" + tag + ".dat")).string(), eps, ue);
        }
    }
    std::cout << "sweep: slope_I = " << format_double(rep.fits[0].slope_I)
              << ", slope_x = " << format_double(rep.fits[0].slope_x) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

inline int run(std::vector<std::string> args) {
    CLI::App app{"hjcon: constrained Hamilton-Jacobi / selection-mutation solver suite"};
    app.require_subcommand(1);

    std::string out_dir;
    bool plot = false;
    app.add_option("--out", out_dir, "output directory (default: config, $HJCON_OUT, ./hjcon_out)");
    app.add_flag("--emit-plot-data", plot, "write gnuplot-ready two-column files");

    std::string model_path, config_path;
    double eps_flag = -1.0, delta_flag = -1.0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", out_dir, "output directory");
        sub->add_flag("--emit-plot-data", plot, "write gnuplot-ready two-column files");
        return sub;
    };

    auto* validate = add_common(app.add_subcommand("validate-model", "check the hypothesis block"));
    validate->add_option("model", model_path, "model JSON file")->required();

    auto* oracle =
        add_common(app.add_subcommand("solve-oracle", "integrate the quadratic-ansatz reduction"));
    oracle->add_option("--config", config_path, "run config JSON")->required();

    auto* limit =
        add_common(app.add_subcommand("solve-limit", "grid solver for the constrained problem"));
    limit->add_option("--config", config_path, "run config JSON")->required();

    auto* para =
        add_common(app.add_subcommand("solve-parabolic", "selection-mutation solver at fixed eps"));
    para->add_option("--config", config_path, "run config JSON")->required();
    para->add_option("--eps", eps_flag, "diffusion scale (overrides config)");

    auto* fp = add_common(
        app.add_subcommand("fixed-point", "Picard iteration diagnostics for the map Phi"));
    fp->add_option("--config", config_path, "run config JSON")->required();
    fp->add_option("--delta", delta_flag, "time horizon (overrides config)");

    auto* lip = add_common(app.add_subcommand("lipschitz-probe", "W^{2,inf} Lipschitz ratio probe"));
    lip->add_option("--config", config_path, "run config JSON")->required();

    auto* sw = add_common(app.add_subcommand("sweep", "eps ladder against the limit solution"));
    sw->add_option("--config", config_path, "run config JSON")->required();

    std::vector<const char*> argv;
    argv.push_back("hjcon");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (validate->parsed()) return cmd_validate_model(model_path, out_dir);
        const json cfg = load_json_file(config_path);
        if (oracle->parsed()) return cmd_solve_oracle(cfg, out_dir, plot);
        if (limit->parsed()) return cmd_solve_limit(cfg, out_dir, plot);
        if (para->parsed()) return cmd_solve_parabolic(cfg, eps_flag, out_dir, plot);
        if (fp->parsed()) return cmd_fixed_point(cfg, delta_flag, out_dir);
        if (lip->parsed()) return cmd_lipschitz_probe(cfg, out_dir);
        if (sw->parsed()) return cmd_sweep(cfg, out_dir, plot);
        return 1;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
}

} // namespace hjcon::cli

#endif // HJCON_CLI_HPP
