#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace koopstab {

using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Single-input control-affine plant  x' = F(x) + G(x) u.
struct ControlAffineSystem {
    std::string name;
    int n = 0;
    VectorField drift;        // F
    VectorField input_field;  // G
    Eigen::VectorXd equilibrium;
    std::map<std::string, double> params;
};

Eigen::VectorXd eval_rhs(const ControlAffineSystem& sys, const Eigen::VectorXd& x, double u);

// Benchmarks
ControlAffineSystem duffing();
ControlAffineSystem lorenz(double rho = 28.0, double sigma = 10.0, double beta = 8.0 / 3.0);

// Three-machine closed network (classical swing model). Susceptances, EMFs
// and equilibrium angles are placeholders; constant bus loads are derived so
// that (delta_star, omega_s) is an exact fixed point.
struct NineBusParams {
    Eigen::Vector3d inertia{23.64, 6.4, 3.1};
    Eigen::Vector3d damping{0.05, 0.95, 0.05};
    Eigen::Vector3d mech_power{0.719, 1.63, 0.85};
    Eigen::Vector3d emf{1.0566, 1.0502, 1.0170};
    double x12 = 0.6, x13 = 0.9, x23 = 0.75;
    Eigen::Vector3d delta_star{0.04, 0.35, 0.25};
    double omega_s = 1.0;
    int input_generator = 1;  // 0-based; paper's single input acts on generator 2
};
ControlAffineSystem nine_bus(const NineBusParams& p = {});

struct Trajectory {
    double delta_t = 0.0;
    std::vector<Eigen::VectorXd> states;
    std::vector<double> inputs;  // one per transition
    std::uint64_t seed = 0;
};

// Euler-Maruyama with internal step h = delta_t / substeps; additive Gaussian
// noise of per-component variance noise_var * h per internal step.
Trajectory integrate_sde(const ControlAffineSystem& sys, const Eigen::VectorXd& x0, int s,
                         double noise_var, double delta_t, double horizon, int substeps,
                         std::uint64_t seed, double blow_up = 1e6);

// Classical fixed-step RK4.
Trajectory integrate_ode(const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& rhs,
                         const Eigen::VectorXd& x0, double dt, double horizon, double blow_up = 1e6);

struct DatasetMeta {
    std::string system;
    double noise_var = 0.0;
    std::uint64_t seed = 0;
    int num_ics = 0;
    int substeps = 1;
    double horizon = 0.0;
};

// Snapshot pairs (columns of X advance to the matching columns of Y in one
// sampling interval); pairs never straddle trajectory boundaries.
struct TrajectoryDataset {
    int input_mode = 0;  // s
    double delta_t = 0.0;
    Eigen::MatrixXd X;  // n x M
    Eigen::MatrixXd Y;  // n x M
    std::vector<int> pair_traj;  // provenance: trajectory index per pair
    std::vector<int> pair_step;  // provenance: step index within trajectory
    DatasetMeta meta;

    Eigen::Index pairs() const { return X.cols(); }
    int dim() const { return static_cast<int>(X.rows()); }

    // Same pairs translated by -shift (used to work in equilibrium-centered
    // coordinates before lifting).
    TrajectoryDataset shifted(const Eigen::VectorXd& shift) const;
};

using IcBox = std::vector<std::pair<double, double>>;

TrajectoryDataset generate_dataset(const ControlAffineSystem& sys, int num_ics, const IcBox& ic_box,
                                   int s, double noise_var, double delta_t, double horizon,
                                   int substeps, std::uint64_t seed, double blow_up = 1e6);

TrajectoryDataset dataset_from_trajectories(const std::vector<Trajectory>& trajs, int s,
                                            double delta_t, const DatasetMeta& meta);

}  // namespace koopstab
