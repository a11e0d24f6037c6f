#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "koopstab/errors.hpp"
#include "koopstab/io.hpp"
#include "koopstab/pipeline.hpp"
#include "koopstab/rng.hpp"

using namespace koopstab;

namespace {

int exit_code_for(const Error& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const FormatError*>(&e)) return 2;
    if (dynamic_cast<const IdentificationError*>(&e)) return 3;
    return 1;
}

ControllerSpec controller_of(const PipelineConfig& cfg) { return cfg.controller; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-driven bilinear Koopman identification and CLF stabilization"};
    app.require_subcommand(1);

    std::string config_path, out_path, outdir, model_path, clf_path, data0_path, data1_path;
    int mode = 0;
    std::string sim_mode = "closed";
    std::string z0_str;
    double u_const = 0.0;
    double sim_dt = 1e-3, sim_horizon = 1.0;

    auto* gen = app.add_subcommand("generate", "Integrate noisy trajectories into a dataset file");
    gen->add_option("--config", config_path, "pipeline config")->required();
    gen->add_option("--mode", mode, "input mode s (0 or 1)")->check(CLI::Range(0, 1));
    gen->add_option("--out", out_path, "output dataset csv")->required();

    auto* fit = app.add_subcommand("fit", "EDMD + realified bilinear model from two datasets");
    fit->add_option("--config", config_path, "pipeline config")->required();
    fit->add_option("--data0", data0_path, "zero-input dataset")->required();
    fit->add_option("--data1", data1_path, "step-input dataset")->required();
    fit->add_option("--out", out_path, "output model file")->required();

    auto* clf_cmd = app.add_subcommand("clf", "Solve for a quadratic CLF and run the Theorem-2 check");
    clf_cmd->add_option("--config", config_path, "pipeline config")->required();
    clf_cmd->add_option("--model", model_path, "model file")->required();
    clf_cmd->add_option("--out", out_path, "output CLF file")->required();

    auto* sim = app.add_subcommand("simulate", "Closed-loop / open-loop / surrogate simulation");
    sim->add_option("--config", config_path, "pipeline config")->required();
    sim->add_option("--model", model_path, "model file")->required();
    sim->add_option("--clf", clf_path, "CLF file (required for closed loop)");
    sim->add_option("--outdir", outdir, "output directory")->required();
    sim->add_option("--mode", sim_mode, "closed|open|surrogate")
        ->check(CLI::IsMember({"closed", "open", "surrogate"}));
    sim->add_option("--z0", z0_str, "surrogate initial lifted state (space-separated)");
    sim->add_option("--u-const", u_const, "surrogate constant input");
    sim->add_option("--dt", sim_dt, "surrogate step");
    sim->add_option("--horizon", sim_horizon, "surrogate horizon");

    auto* cx = app.add_subcommand("complexity", "Sample-complexity sweep (error vs data length)");
    cx->add_option("--config", config_path, "pipeline config")->required();
    cx->add_option("--out", out_path, "output curve csv")->required();

    auto* pipe = app.add_subcommand("pipeline", "Full design loop: generate, fit, clf, validate");
    pipe->add_option("--config", config_path, "pipeline config")->required();
    pipe->add_option("--outdir", outdir, "artifact directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const PipelineConfig cfg = parse_config(config_path);
            const ControlAffineSystem sys = cfg.make_system();
            const std::uint64_t seed = mode == 0 ? cfg.seed : splitmix64(cfg.seed ^ 0x5bd1e995u);
            const TrajectoryDataset ds = generate_dataset(
                sys, cfg.num_ics, cfg.ic_box, mode, cfg.noise_var, cfg.delta_t, cfg.horizon,
                cfg.substeps, seed);
            save_dataset(ds, out_path);
            std::cout << "wrote " << ds.pairs() << " snapshot pairs to " << out_path << "\n";
        } else if (fit->parsed()) {
            const PipelineConfig cfg = parse_config(config_path);
            const ControlAffineSystem sys = cfg.make_system();
            const TrajectoryDataset d0 = load_dataset(data0_path);
            const TrajectoryDataset d1 = load_dataset(data1_path);
            FitOptions fopts;
            fopts.svd_rtol = cfg.svd_rtol;
            fopts.drop_tol = cfg.drop_tol;
            fopts.max_modes = cfg.max_modes;
            fopts.method = cfg.b_method;
            const Dictionary dict = build_dictionary(sys.n, cfg.degree);
            const BilinearModel m = fit_bilinear_model(d0, d1, dict, sys.equilibrium, fopts);
            save_model(m, out_path);
            std::cout << "retained " << m.n_modes() << " modes; continuous eigenvalues:\n";
            for (int i = 0; i < m.n_modes(); ++i)
                if (m.eigs[i].imag() >= 0.0)
                    std::cout << "  " << m.eigs[i].real() << " + " << m.eigs[i].imag() << "i\n";
        } else if (clf_cmd->parsed()) {
            const PipelineConfig cfg = parse_config(config_path);
            const BilinearModel m = load_model(model_path);
            ClfDesignOptions dopts;
            dopts.gammas = cfg.gamma_ladder;
            dopts.init_s = cfg.init_s;
            dopts.c_min = cfg.c_min;
            dopts.c_max = cfg.c_max;
            dopts.max_iters = cfg.max_iters;
            dopts.seed = cfg.clf_seed;
            dopts.check_samples = cfg.check_samples;
            dopts.check_tau = cfg.check_tau;
            std::string log;
            const QuadraticCLF clf = design_clf(m.Lambda, m.B, dopts, &log);
            std::cout << log;
            save_clf(clf, out_path);
            if (!clf.check.passed) {
                std::cerr << "stabilizability check failed for every gamma and candidate\n";
                return 4;
            }
            std::cout << "certificate from " << clf.origin << "\n";
        } else if (sim->parsed()) {
            const PipelineConfig cfg = parse_config(config_path);
            const BilinearModel m = load_model(model_path);
            std::filesystem::create_directories(outdir);
            if (sim_mode == "surrogate") {
                std::istringstream is(z0_str);
                std::vector<double> vals;
                double v;
                while (is >> v) vals.push_back(v);
                if (static_cast<int>(vals.size()) != m.n_modes())
                    throw ConfigError("--z0 must have one value per retained mode");
                const Eigen::VectorXd z0 = Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size());
                const LiftedTrajectory lt =
                    predict(m, z0, [u_const](double) { return u_const; }, sim_dt, sim_horizon);
                std::ofstream f(std::filesystem::path(outdir) / "surrogate.csv");
                f << "t";
                for (int i = 0; i < m.n_modes(); ++i) f << ",z" << i + 1;
                f << ",u\n";
                for (Eigen::Index k = 0; k < lt.times.size(); ++k) {
                    f << fmt17(lt.times[k]);
                    for (int i = 0; i < m.n_modes(); ++i) f << ',' << fmt17(lt.Z(i, k));
                    f << ',' << fmt17(lt.u[k]) << '\n';
                }
                std::cout << "wrote surrogate trajectory\n";
            } else {
                if (clf_path.empty()) throw ConfigError("simulate: --clf is required");
                const QuadraticCLF clf = load_clf(clf_path);
                const ControlAffineSystem sys = cfg.make_system();
                std::vector<SimulationResult> runs;
                for (int i = 0; i < cfg.validate_num_ics; ++i) {
                    Rng rng = Rng::stream(cfg.validate_seed, i);
                    Eigen::VectorXd x0(sys.n);
                    for (int d = 0; d < sys.n; ++d)
                        x0[d] = rng.uniform(cfg.validate_ic_box[d].first, cfg.validate_ic_box[d].second);
                    SimulationResult r =
                        sim_mode == "open"
                            ? simulate_open_loop(sys, m, clf, x0, cfg.validate_dt,
                                                 cfg.validate_horizon, cfg.validate_radius)
                            : simulate_closed_loop(sys, m, clf, controller_of(cfg), x0,
                                                   cfg.validate_dt, cfg.validate_horizon,
                                                   cfg.validate_radius);
                    save_simulation(
                        r, (std::filesystem::path(outdir) / ("sim_ic" + std::to_string(i) + ".csv")).string(),
                        i);
                    runs.push_back(std::move(r));
                }
                save_simulation_summary(runs,
                                        (std::filesystem::path(outdir) / "sim_summary.csv").string());
                int conv = 0;
                for (const auto& r : runs) conv += r.converged;
                std::cout << conv << "/" << runs.size() << " converged\n";
            }
        } else if (cx->parsed()) {
            const PipelineConfig cfg = parse_config(config_path);
            const ControlAffineSystem sys = cfg.make_system();
            SweepOptions so;
            so.num_ics = cfg.num_ics;
            so.seed = cfg.seed;
            so.ic_box = cfg.ic_box;
            so.delta_t = cfg.delta_t;
            so.noise_var = cfg.noise_var;
            so.substeps = cfg.substeps;
            so.fit.svd_rtol = cfg.svd_rtol;
            so.fit.drop_tol = cfg.drop_tol;
            so.fit.max_modes = cfg.max_modes;
            so.fit.method = cfg.b_method;
            const Dictionary dict = build_dictionary(sys.n, cfg.degree);
            const ErrorCurve curve = sample_complexity_sweep(sys, dict, so);
            save_curve(curve, out_path);
            std::cout << "slope_lambda=" << curve.slope_lambda << " slope_b=" << curve.slope_b
                      << "\n";
        } else if (pipe->parsed()) {
            const PipelineConfig cfg = parse_config(config_path);
            const PipelineOutcome outc = run_pipeline(cfg, outdir);
            std::cout << outc.summary;
            if (outc.status != PipelineStatus::Success)
                std::cerr << "pipeline failed at stage: " << outc.failed_stage << "\n";
            return static_cast<int>(outc.status);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
