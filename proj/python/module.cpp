#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "koopstab/analysis.hpp"
#include "koopstab/clf.hpp"
#include "koopstab/config.hpp"
#include "koopstab/control.hpp"
#include "koopstab/errors.hpp"
#include "koopstab/io.hpp"
#include "koopstab/pipeline.hpp"

namespace py = pybind11;
using namespace koopstab;

namespace {

IcBox box_from(const std::vector<std::pair<double, double>>& b) { return b; }

ControllerSpec make_controller(const std::string& kind, double beta, double gain, double q_coeff,
                               std::optional<double> saturation) {
    ControllerSpec spec;
    if (kind == "gradient") spec.kind = ControlLaw::Gradient;
    else if (kind == "bangbang") spec.kind = ControlLaw::BangBang;
    else if (kind == "sontag") spec.kind = ControlLaw::Sontag;
    else throw ConfigError("controller kind must be gradient|bangbang|sontag");
    spec.beta = beta;
    spec.gain = gain;
    spec.q_coeff = q_coeff;
    spec.saturation = saturation;
    return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bilinear Koopman identification and CLF-based stabilization";

    py::register_exception<Error>(m, "KoopstabError");

    py::class_<Dictionary>(m, "Dictionary")
        .def_readonly("n", &Dictionary::n)
        .def_readonly("degree", &Dictionary::degree)
        .def_property_readonly("size", &Dictionary::size)
        .def_readonly("exponents", &Dictionary::exponents)
        .def("evaluate", [](const Dictionary& d, const Eigen::VectorXd& x) { return d.evaluate(x); });
    m.def("build_dictionary", &build_dictionary, py::arg("n"), py::arg("degree"));

    py::class_<ControlAffineSystem>(m, "System")
        .def_readonly("name", &ControlAffineSystem::name)
        .def_readonly("n", &ControlAffineSystem::n)
        .def_readonly("equilibrium", &ControlAffineSystem::equilibrium)
        .def_readonly("params", &ControlAffineSystem::params)
        .def("rhs", [](const ControlAffineSystem& s, const Eigen::VectorXd& x, double u) {
            return eval_rhs(s, x, u);
        }, py::arg("x"), py::arg("u") = 0.0);
    m.def("duffing", &duffing);
    m.def("lorenz", &lorenz, py::arg("rho") = 28.0, py::arg("sigma") = 10.0,
          py::arg("beta") = 8.0 / 3.0);
    m.def("nine_bus", [] { return nine_bus(); });

    py::class_<TrajectoryDataset>(m, "Dataset")
        .def_readonly("input_mode", &TrajectoryDataset::input_mode)
        .def_readonly("delta_t", &TrajectoryDataset::delta_t)
        .def_readonly("X", &TrajectoryDataset::X)
        .def_readonly("Y", &TrajectoryDataset::Y)
        .def_property_readonly("pairs", &TrajectoryDataset::pairs);
    m.def("generate_dataset",
          [](const ControlAffineSystem& sys, int num_ics,
             const std::vector<std::pair<double, double>>& ic_box, int s, double noise_var,
             double delta_t, double horizon, int substeps, std::uint64_t seed) {
              return generate_dataset(sys, num_ics, box_from(ic_box), s, noise_var, delta_t,
                                      horizon, substeps, seed);
          },
          py::arg("system"), py::arg("num_ics"), py::arg("ic_box"), py::arg("s"),
          py::arg("noise_var"), py::arg("delta_t"), py::arg("horizon"), py::arg("substeps") = 25,
          py::arg("seed") = 0);
    m.def("save_dataset", &save_dataset);
    m.def("load_dataset", &load_dataset);

    py::class_<BilinearModel>(m, "BilinearModel")
        .def_readonly("Lambda", &BilinearModel::Lambda)
        .def_readonly("B", &BilinearModel::B)
        .def_readonly("V_r", &BilinearModel::V_r)
        .def_readonly("x_star", &BilinearModel::x_star)
        .def_readonly("delta_t", &BilinearModel::delta_t)
        .def_property_readonly("n_modes", &BilinearModel::n_modes)
        .def_property_readonly("eigenvalues", [](const BilinearModel& mm) { return mm.eigs; })
        .def("lift", [](const BilinearModel& mm, const Eigen::VectorXd& x) { return lift(mm, x); });
    m.def("fit_bilinear_model",
          [](const TrajectoryDataset& d0, const TrajectoryDataset& d1, const Dictionary& dict,
             const Eigen::VectorXd& x_star, double svd_rtol, double drop_tol,
             const std::string& method) {
              FitOptions fo;
              fo.svd_rtol = svd_rtol;
              fo.drop_tol = drop_tol;
              fo.method = method == "refit" ? BMethod::Refit : BMethod::Similarity;
              return fit_bilinear_model(d0, d1, dict, x_star, fo);
          },
          py::arg("data0"), py::arg("data1"), py::arg("dictionary"), py::arg("x_star"),
          py::arg("svd_rtol") = 1e-10, py::arg("drop_tol") = 1e-3, py::arg("method") = "similarity");
    m.def("save_model", &save_model);
    m.def("load_model", &load_model);
    m.def("predict",
          [](const BilinearModel& model, const Eigen::VectorXd& z0, double u_const, double dt,
             double horizon) {
              const LiftedTrajectory lt =
                  predict(model, z0, [u_const](double) { return u_const; }, dt, horizon);
              return py::make_tuple(lt.times, lt.Z, lt.u);
          },
          py::arg("model"), py::arg("z0"), py::arg("u_const"), py::arg("dt"), py::arg("horizon"));

    py::class_<StabilizabilityReport>(m, "StabilizabilityReport")
        .def_readonly("passed", &StabilizabilityReport::passed)
        .def_readonly("samples_tested", &StabilizabilityReport::samples_tested)
        .def_readonly("samples_in_region", &StabilizabilityReport::samples_in_region)
        .def_readonly("worst_margin", &StabilizabilityReport::worst_margin)
        .def_readonly("witness", &StabilizabilityReport::witness);
    py::class_<QuadraticCLF>(m, "QuadraticCLF")
        .def_readonly("P", &QuadraticCLF::P)
        .def_readonly("t_star", &QuadraticCLF::t_star)
        .def_readonly("gamma", &QuadraticCLF::gamma)
        .def_readonly("c_min", &QuadraticCLF::c_min)
        .def_readonly("c_max", &QuadraticCLF::c_max)
        .def_readonly("check", &QuadraticCLF::check)
        .def_property_readonly("best_objective", [](const QuadraticCLF& c) {
            return c.trace.best_objective;
        });
    m.def("solve_clf", &solve_clf, py::arg("Lambda"), py::arg("B"), py::arg("gamma") = 2.0,
          py::arg("c_min") = 0.1, py::arg("c_max") = 10.0, py::arg("max_iters") = 5000,
          py::arg("seed") = 0);
    m.def("check_stabilizability", &check_stabilizability, py::arg("P"), py::arg("Lambda"),
          py::arg("B"), py::arg("n_samples") = 10000, py::arg("tau") = 1e-6, py::arg("seed") = 0);
    m.def("clf_terms", &clf_terms, py::arg("P"), py::arg("Lambda"), py::arg("B"), py::arg("z"));
    m.def("save_clf", &save_clf);
    m.def("load_clf", &load_clf);

    py::class_<ControllerSpec>(m, "Controller")
        .def_readonly("beta", &ControllerSpec::beta)
        .def_readonly("gain", &ControllerSpec::gain)
        .def_readonly("q_coeff", &ControllerSpec::q_coeff);
    m.def("controller", &make_controller, py::arg("kind"), py::arg("beta") = 1.0,
          py::arg("gain") = 1.0, py::arg("q_coeff") = 10.0, py::arg("saturation") = py::none());
    m.def("feedback", &feedback, py::arg("controller"), py::arg("clf"), py::arg("model"),
          py::arg("z"));

    py::class_<SimulationResult>(m, "SimulationResult")
        .def_readonly("times", &SimulationResult::times)
        .def_readonly("states", &SimulationResult::states)
        .def_readonly("lifted", &SimulationResult::lifted)
        .def_readonly("controls", &SimulationResult::controls)
        .def_readonly("lyapunov", &SimulationResult::lyapunov)
        .def_readonly("converged", &SimulationResult::converged)
        .def_readonly("final_distance", &SimulationResult::final_distance);
    m.def("simulate_closed_loop", &simulate_closed_loop, py::arg("system"), py::arg("model"),
          py::arg("clf"), py::arg("controller"), py::arg("x0"), py::arg("dt"), py::arg("horizon"),
          py::arg("convergence_radius"), py::arg("blow_up") = 1e6);
    m.def("simulate_open_loop", &simulate_open_loop, py::arg("system"), py::arg("model"),
          py::arg("clf"), py::arg("x0"), py::arg("dt"), py::arg("horizon"),
          py::arg("convergence_radius"), py::arg("blow_up") = 1e6);

    py::class_<ErrorCurve>(m, "ErrorCurve")
        .def_readonly("lengths", &ErrorCurve::lengths)
        .def_readonly("lambda_err", &ErrorCurve::lambda_err)
        .def_readonly("b_err", &ErrorCurve::b_err)
        .def_readonly("stderr_lambda", &ErrorCurve::stderr_lambda)
        .def_readonly("stderr_b", &ErrorCurve::stderr_b)
        .def_readonly("slope_lambda", &ErrorCurve::slope_lambda)
        .def_readonly("slope_b", &ErrorCurve::slope_b);
    m.def("model_error", &model_error, py::arg("model_a"), py::arg("model_b"));
    m.def("sample_complexity_sweep",
          [](const ControlAffineSystem& sys, const Dictionary& dict, std::vector<int> lengths,
             int num_ics, int ref_length, int trials, std::uint64_t seed,
             const std::vector<std::pair<double, double>>& ic_box, double delta_t,
             double noise_var, int substeps) {
              SweepOptions so;
              so.lengths = std::move(lengths);
              so.num_ics = num_ics;
              so.ref_length = ref_length;
              so.trials = trials;
              so.seed = seed;
              so.ic_box = box_from(ic_box);
              so.delta_t = delta_t;
              so.noise_var = noise_var;
              so.substeps = substeps;
              return sample_complexity_sweep(sys, dict, so);
          },
          py::arg("system"), py::arg("dictionary"), py::arg("lengths") = std::vector<int>{},
          py::arg("num_ics") = 10, py::arg("ref_length") = 50, py::arg("trials") = 10,
          py::arg("seed") = 0, py::arg("ic_box") = std::vector<std::pair<double, double>>{},
          py::arg("delta_t") = 0.25, py::arg("noise_var") = 0.01, py::arg("substeps") = 25);
    m.def("save_curve", &save_curve);

    py::class_<PipelineOutcome>(m, "PipelineOutcome")
        .def_property_readonly("status",
                               [](const PipelineOutcome& o) { return static_cast<int>(o.status); })
        .def_readonly("summary", &PipelineOutcome::summary)
        .def_readonly("n_modes", &PipelineOutcome::n_modes)
        .def_readonly("t_star", &PipelineOutcome::t_star)
        .def_readonly("check_passed", &PipelineOutcome::check_passed)
        .def_readonly("gamma_used", &PipelineOutcome::gamma_used)
        .def_readonly("converged", &PipelineOutcome::converged)
        .def_readonly("total_ics", &PipelineOutcome::total_ics);
    m.def("run_pipeline",
          [](const std::string& config_path, const std::string& outdir) {
              return run_pipeline(parse_config(config_path), outdir);
          },
          py::arg("config_path"), py::arg("outdir"));
}
