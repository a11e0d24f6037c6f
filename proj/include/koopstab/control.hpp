#pragma once

#include <Eigen/Core>
#include <optional>

#include "koopstab/clf.hpp"
#include "koopstab/koopman.hpp"
#include "koopstab/systems.hpp"

namespace koopstab {

enum class ControlLaw { Gradient, BangBang, Sontag };

struct ControllerSpec {
    ControlLaw kind = ControlLaw::Gradient;
    double beta = 1.0;     // gradient gain
    double gain = 1.0;     // bang-bang gain
    double q_coeff = 10.0; // Sontag state cost q(z) = q_coeff * z'z
    std::optional<double> saturation;
    double b_eps = 1e-9;   // Sontag "otherwise" branch threshold
};

double feedback(const ControllerSpec& spec, const QuadraticCLF& clf, const BilinearModel& model,
                const Eigen::VectorXd& z);

Eigen::VectorXd closed_loop_rhs(const ControlAffineSystem& sys, const BilinearModel& model,
                                const QuadraticCLF& clf, const ControllerSpec& spec,
                                const Eigen::VectorXd& x);

struct SimulationResult {
    Eigen::VectorXd times;
    Eigen::MatrixXd states;   // n x (samples+1)
    Eigen::MatrixXd lifted;   // N_r x (samples+1)
    Eigen::VectorXd controls;
    Eigen::VectorXd lyapunov; // V = z' P z
    bool converged = false;
    double final_distance = 0.0;
};

SimulationResult simulate_closed_loop(const ControlAffineSystem& sys, const BilinearModel& model,
                                      const QuadraticCLF& clf, const ControllerSpec& spec,
                                      const Eigen::VectorXd& x0, double dt, double horizon,
                                      double convergence_radius, double blow_up = 1e6);

// u == 0 baseline; lifted state and V are still recorded for diagnostics.
SimulationResult simulate_open_loop(const ControlAffineSystem& sys, const BilinearModel& model,
                                    const QuadraticCLF& clf, const Eigen::VectorXd& x0, double dt,
                                    double horizon, double convergence_radius, double blow_up = 1e6);

}  // namespace koopstab
