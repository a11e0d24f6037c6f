#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace koopstab {

struct StabilizabilityReport {
    bool passed = false;
    int samples_tested = 0;
    int samples_in_region = 0;  // samples with z'(P Lambda + Lambda' P) z >= 0
    double worst_margin = 0.0;  // min |z'(P B + B' P) z| over that region
    Eigen::VectorXd witness;    // z attaining the worst margin (empty if vacuous)
    double tau = 1e-6;
};

struct SolveTrace {
    std::vector<double> best_objective;  // nonincreasing by construction
    int iterations = 0;
};

struct QuadraticCLF {
    Eigen::MatrixXd P;
    double t_star = 0.0;  // lambda_max(P Lambda + Lambda' P) at the returned P
    double gamma = 2.0;
    double c_min = 0.0, c_max = 0.0;
    StabilizabilityReport check;
    SolveTrace trace;
    std::uint64_t seed = 0;
    std::string origin = "subgradient";  // which design path produced P
};

// Frobenius-nearest symmetric matrix with spectrum in [c_min, c_max]
// (eigenvalue clipping).
Eigen::MatrixXd project_spectral_band(const Eigen::MatrixXd& sym, double c_min, double c_max);

// Projected subgradient minimization of
//   f(P) = lambda_max(P Lambda + Lambda' P) - gamma Trace(P B)
// over { P = P' : c_min I <= P <= c_max I }.
QuadraticCLF solve_clf(const Eigen::MatrixXd& Lambda, const Eigen::MatrixXd& B, double gamma,
                       double c_min, double c_max, int max_iters = 5000, std::uint64_t seed = 0);

// Sampling + local-refinement surrogate for Theorem-2's open condition.
StabilizabilityReport check_stabilizability(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Lambda,
                                            const Eigen::MatrixXd& B, int n_samples = 10000,
                                            double tau = 1e-6, std::uint64_t seed = 0);

// (a, b) = (z'(P Lambda + Lambda' P) z, z'(P B + B' P) z).
std::pair<double, double> clf_terms(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Lambda,
                                    const Eigen::MatrixXd& B, const Eigen::VectorXd& z);

// Solves A'P + PA + Q = 0 (Bartels-Stewart); A must be Hurwitz.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q);

// Certificate candidate built from a constant input: if Lambda + s B is
// Hurwitz, its Lyapunov matrix projected into the spectral band makes
// z'(P Lambda + Lambda'P) z >= 0 imply a genuine |z'(P B + B'P) z| margin.
std::optional<Eigen::MatrixXd> lyapunov_clf_candidate(const Eigen::MatrixXd& Lambda,
                                                      const Eigen::MatrixXd& B, double s,
                                                      double c_min, double c_max);

struct ClfDesignOptions {
    std::vector<double> gammas = {2.0, 0.5, 1.0, 4.0, 8.0};
    std::vector<double> init_s = {0.25, 0.5, 1.0, 2.0, -0.25, -0.5, -1.0, -2.0};
    double c_min = 0.1, c_max = 10.0;
    int max_iters = 5000;
    std::uint64_t seed = 0;
    int check_samples = 10000;
    double check_tau = 1e-6;
};

// Full design loop: subgradient solves over the gamma ladder, then constant-
// input Lyapunov candidates; each is checked and the first certificate wins.
// Returns the last attempt (check.passed == false) when everything fails.
QuadraticCLF design_clf(const Eigen::MatrixXd& Lambda, const Eigen::MatrixXd& B,
                        const ClfDesignOptions& opts, std::string* log = nullptr);

}  // namespace koopstab
