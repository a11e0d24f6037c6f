#include "koopstab/pipeline.hpp"

#include <filesystem>
#include <limits>
#include <sstream>

#include "koopstab/errors.hpp"
#include "koopstab/io.hpp"
#include "koopstab/parallel.hpp"
#include "koopstab/rng.hpp"

namespace koopstab {

PipelineOutcome run_pipeline(const PipelineConfig& cfg, const std::string& outdir) {
    PipelineOutcome out;
    std::ostringstream summary;
    std::filesystem::create_directories(outdir);
    const auto artifact = [&](const std::string& name) {
        return (std::filesystem::path(outdir) / name).string();
    };

    ControlAffineSystem sys;
    try {
        validate_config(cfg);
        sys = cfg.make_system();
        if (cfg.ic_box.size() != static_cast<std::size_t>(sys.n) ||
            cfg.validate_ic_box.size() != static_cast<std::size_t>(sys.n))
            throw ConfigError("ic_box / validate.ic_box must list one lo hi pair per state");
    } catch (const Error& e) {
        out.status = PipelineStatus::BadConfig;
        out.failed_stage = "config";
        out.summary = e.what();
        return out;
    }

    const Eigen::VectorXd x_star = cfg.target_equilibrium(sys);
    BilinearModel model;
    try {
        const TrajectoryDataset data0 =
            generate_dataset(sys, cfg.num_ics, cfg.ic_box, 0, cfg.noise_var, cfg.delta_t,
                             cfg.horizon, cfg.substeps, cfg.seed);
        const TrajectoryDataset data1 =
            generate_dataset(sys, cfg.num_ics, cfg.ic_box, 1, cfg.noise_var, cfg.delta_t,
                             cfg.horizon, cfg.substeps, splitmix64(cfg.seed ^ 0x5bd1e995u));
        save_dataset(data0, artifact("dataset_s0.csv"));
        save_dataset(data1, artifact("dataset_s1.csv"));

        const Dictionary dict = build_dictionary(sys.n, cfg.degree);
        FitOptions fopts;
        fopts.svd_rtol = cfg.svd_rtol;
        fopts.drop_tol = cfg.drop_tol;
        fopts.max_modes = cfg.max_modes;
        fopts.method = cfg.b_method;
        model = fit_bilinear_model(data0, data1, dict, x_star, fopts);
        save_model(model, artifact("model.txt"));
        out.n_modes = model.n_modes();
        summary << "identified " << model.n_modes() << " modes (dictionary " << dict.size()
                << " terms)\n";
        summary << "leading continuous eigenvalues:";
        for (int i = 0; i < std::min(6, model.n_modes()); ++i)
            summary << " (" << fmt17(model.eigs[i].real()) << (model.eigs[i].imag() >= 0 ? "+" : "")
                    << fmt17(model.eigs[i].imag()) << "i)";
        summary << '\n';
    } catch (const Error& e) {
        out.status = PipelineStatus::IdentificationFailed;
        out.failed_stage = "identification";
        out.summary = summary.str() + "identification failed: " + e.what();
        return out;
    }

    QuadraticCLF clf;
    try {
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
        clf = design_clf(model.Lambda, model.B, dopts, &log);
        summary << log;
        save_clf(clf, artifact("clf.txt"));
        out.t_star = clf.t_star;
        out.check_passed = clf.check.passed;
        out.gamma_used = clf.gamma;
        if (!clf.check.passed) {
            out.status = PipelineStatus::ClfCheckFailed;
            out.failed_stage = "clf";
            out.summary =
                summary.str() + "stabilizability check failed for every gamma and candidate";
            return out;
        }
        summary << "certificate from " << clf.origin << '\n';
    } catch (const Error& e) {
        out.status = PipelineStatus::ClfCheckFailed;
        out.failed_stage = "clf";
        out.summary = summary.str() + "clf stage failed: " + e.what();
        return out;
    }

    try {
        std::vector<SimulationResult> runs(cfg.validate_num_ics);
        std::vector<std::string> failures(cfg.validate_num_ics);
        parallel_for(static_cast<std::size_t>(cfg.validate_num_ics), [&](std::size_t i) {
            Rng rng = Rng::stream(cfg.validate_seed, i);
            Eigen::VectorXd x0(sys.n);
            for (int d = 0; d < sys.n; ++d)
                x0[d] = rng.uniform(cfg.validate_ic_box[d].first, cfg.validate_ic_box[d].second);
            try {
                runs[i] = simulate_closed_loop(sys, model, clf, cfg.controller, x0, cfg.validate_dt,
                                               cfg.validate_horizon, cfg.validate_radius);
            } catch (const DivergenceError& e) {
                failures[i] = e.what();
                runs[i].converged = false;
                runs[i].final_distance = std::numeric_limits<double>::infinity();
            }
        });
        for (std::size_t i = 0; i < runs.size(); ++i) {
            if (!failures[i].empty()) {
                summary << "ic " << i << ": diverged (" << failures[i] << ")\n";
                continue;
            }
            save_simulation(runs[i], artifact("sim_ic" + std::to_string(i) + ".csv"),
                            static_cast<int>(i));
            out.converged += runs[i].converged ? 1 : 0;
        }
        save_simulation_summary(runs, artifact("sim_summary.csv"));
        out.total_ics = cfg.validate_num_ics;
        summary << "validation: " << out.converged << "/" << out.total_ics
                << " initial conditions converged (radius " << cfg.validate_radius << ")\n";
        const int required =
            cfg.validate_min_converged < 0 ? cfg.validate_num_ics : cfg.validate_min_converged;
        if (out.converged < required) {
            out.status = PipelineStatus::ValidationFailed;
            out.failed_stage = "validation";
            out.summary = summary.str() + "converged count below threshold " +
                          std::to_string(required);
            return out;
        }
    } catch (const Error& e) {
        out.status = PipelineStatus::ValidationFailed;
        out.failed_stage = "validation";
        out.summary = summary.str() + "validation failed: " + e.what();
        return out;
    }

    out.status = PipelineStatus::Success;
    out.summary = summary.str();
    return out;
}

}  // namespace koopstab
