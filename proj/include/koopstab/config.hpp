#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "koopstab/control.hpp"
#include "koopstab/koopman.hpp"
#include "koopstab/systems.hpp"

namespace koopstab {

// Flat key=value configuration with section prefixes. Parsing is strict:
// unknown keys are errors.
struct PipelineConfig {
    // system.
    std::string system_name = "duffing";
    std::map<std::string, double> system_params;  // system-specific overrides
    std::vector<double> equilibrium;              // optional override

    // data.
    int num_ics = 10;
    IcBox ic_box;
    double delta_t = 0.25;
    double horizon = 7.5;
    double noise_var = 0.01;
    int substeps = 25;
    std::uint64_t seed = 2024;

    // dict.
    int degree = 5;
    double svd_rtol = 1e-10;
    double drop_tol = 1e-3;
    int max_modes = 0;
    BMethod b_method = BMethod::Similarity;

    // clf.
    std::vector<double> gamma_ladder = {2.0, 0.5, 1.0, 4.0, 8.0};
    std::vector<double> init_s = {0.25, 0.5, 1.0, 2.0, -0.25, -0.5, -1.0, -2.0};
    double c_min = 0.1;
    double c_max = 10.0;
    int max_iters = 5000;
    std::uint64_t clf_seed = 7;
    int check_samples = 10000;
    double check_tau = 1e-6;

    // ctrl.
    ControllerSpec controller;

    // validate.
    int validate_num_ics = 10;
    IcBox validate_ic_box;
    double validate_dt = 1e-3;
    double validate_horizon = 50.0;
    double validate_radius = 0.05;
    std::uint64_t validate_seed = 99;
    int validate_min_converged = -1;  // -1: require all

    ControlAffineSystem make_system() const;
    Eigen::VectorXd target_equilibrium(const ControlAffineSystem& sys) const;
};

PipelineConfig parse_config(const std::string& path);
void validate_config(const PipelineConfig& cfg);

}  // namespace koopstab
