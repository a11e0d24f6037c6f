#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "koopstab/koopman.hpp"
#include "koopstab/systems.hpp"

namespace koopstab {

// Spectral-norm differences ||dLambda||_2 and ||dB||_2 after greedy
// nearest-continuous-eigenvalue mode alignment.
std::pair<double, double> model_error(const BilinearModel& a, const BilinearModel& b);

struct ErrorCurve {
    std::vector<int> lengths;          // time steps T
    Eigen::VectorXd lambda_err, b_err; // trial means
    Eigen::VectorXd stderr_lambda, stderr_b;
    double slope_lambda = 0.0, slope_b = 0.0;  // log-log OLS slopes
    int trials = 0;
    std::vector<std::string> flags;    // per-length notes (rank deficiency, alignment failures)
};

struct SweepOptions {
    std::vector<int> lengths;  // default 6..30
    int num_ics = 10;
    int ref_length = 50;
    int trials = 10;
    std::uint64_t seed = 0;
    IcBox ic_box;
    double delta_t = 0.25;
    double noise_var = 0.01;
    int substeps = 25;
    FitOptions fit;
};

ErrorCurve sample_complexity_sweep(const ControlAffineSystem& sys, const Dictionary& dict,
                                   const SweepOptions& opts);

}  // namespace koopstab
