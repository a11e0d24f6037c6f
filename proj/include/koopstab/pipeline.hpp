#pragma once

#include <string>

#include "koopstab/config.hpp"

namespace koopstab {

enum class PipelineStatus {
    Success = 0,
    BadConfig = 2,
    IdentificationFailed = 3,
    ClfCheckFailed = 4,
    ValidationFailed = 5,
};

struct PipelineOutcome {
    PipelineStatus status = PipelineStatus::Success;
    std::string summary;
    int n_modes = 0;
    double t_star = 0.0;
    bool check_passed = false;
    double gamma_used = 0.0;
    int converged = 0;
    int total_ics = 0;
    std::string failed_stage;  // empty on success
};

// Runs the full design loop and persists every artifact under outdir
// (datasets, model, CLF, per-IC simulations, summary). Stage failures are
// reported in the outcome; partial artifacts stay on disk.
PipelineOutcome run_pipeline(const PipelineConfig& cfg, const std::string& outdir);

}  // namespace koopstab
