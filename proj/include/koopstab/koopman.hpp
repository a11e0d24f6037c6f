#pragma once

#include <Eigen/Core>
#include <complex>
#include <functional>
#include <vector>

#include "koopstab/dictionary.hpp"
#include "koopstab/systems.hpp"

namespace koopstab {

struct EdmdDiagnostics {
    int rank = 0;           // numerical rank of the Gram matrix
    int truncated = 0;      // singular values below svd_rtol * sigma_max
    double sigma_max = 0.0;
    double sigma_min_kept = 0.0;
    bool m_lt_n = false;    // fewer snapshot pairs than dictionary functions
};

// Least-squares Koopman matrix on a dictionary: U = G^+ A. U acts on
// coefficient vectors; evaluations advance by U^T.
struct KoopmanApprox {
    Eigen::MatrixXd U, G, A;
    int input_mode = 0;
    double delta_t = 0.0;
    double svd_rtol = 1e-10;
    EdmdDiagnostics diag;
};

KoopmanApprox edmd_fit(const TrajectoryDataset& dataset, const Dictionary& dict,
                       double svd_rtol = 1e-10);

enum class ModeKind { Real, PairFirst, PairSecond };

struct Spectrum {
    Eigen::VectorXcd eigenvalues;       // discrete-time, canonical order
    Eigen::MatrixXcd eigenvectors;      // unit columns, phase-fixed
    Eigen::VectorXcd cont_eigenvalues;  // log(lambda) / delta_t where usable
    std::vector<ModeKind> kind;
    std::vector<bool> usable;           // false for truncation null space / branch-invalid modes
    double delta_t = 0.0;
    int n_null = 0;    // |lambda| <= 1e-12: pseudoinverse null space
    int n_branch = 0;  // negative real axis: principal branch undefined
};

Spectrum spectrum(const KoopmanApprox& approx, double defect_cond_threshold = 1e10);

// Real block form: Lambda block-diagonal (1x1 real, 2x2 [[a,b],[-b,a]]),
// V_r rows are v^T for real modes and 2 Re(v)^T / -2 Im(v)^T for pairs.
struct RealifiedBasis {
    Eigen::MatrixXd Lambda;      // N_r x N_r
    Eigen::MatrixXd V_r;         // N_r x N
    std::vector<int> retained;   // indices into the spectrum (pair-first entries and reals)
    Eigen::VectorXcd row_eigs;   // per row of Lambda: (a, +-b)
};

// drop_tol filters the trivial constant mode; max_modes, when positive, caps
// the lifted dimension to the slowest retained modes (pairs kept whole).
RealifiedBasis realify(const Spectrum& spec, double drop_tol = 1e-3, int max_modes = 0);

enum class BMethod { Similarity, Refit };

Eigen::MatrixXd control_matrix(const KoopmanApprox& u0, const KoopmanApprox& u1,
                               const RealifiedBasis& basis, BMethod method,
                               double svd_rtol = 1e-10);

struct BilinearModel {
    Eigen::MatrixXd Lambda;   // N_r x N_r
    Eigen::MatrixXd B;        // N_r x N_r
    Eigen::MatrixXd V_r;      // N_r x N
    Eigen::VectorXcd eigs;    // per row of Lambda
    Dictionary dict;
    Eigen::VectorXd x_star;
    double delta_t = 0.0;
    Eigen::VectorXd lift_offset;  // V_r * Psi(0)

    int n_modes() const { return static_cast<int>(Lambda.rows()); }
    void finalize();  // recompute lift_offset from V_r
};

BilinearModel assemble_model(const RealifiedBasis& basis, const Eigen::MatrixXd& B,
                             const Dictionary& dict, const Eigen::VectorXd& x_star, double delta_t);

// z = V_r Psi(x - x_star) - V_r Psi(0); exactly zero at the equilibrium.
Eigen::VectorXd lift(const BilinearModel& model, const Eigen::VectorXd& x);
void lift_into(const BilinearModel& model, const Eigen::VectorXd& x, Eigen::VectorXd& psi_buf,
               Eigen::VectorXd& z_out);

struct LiftedTrajectory {
    Eigen::VectorXd times;
    Eigen::MatrixXd Z;  // N_r x (samples+1)
    Eigen::VectorXd u;
};

LiftedTrajectory predict(const BilinearModel& model, const Eigen::VectorXd& z0,
                         const std::function<double(double)>& u_signal, double dt, double horizon,
                         double blow_up = 1e6);

struct FitOptions {
    double svd_rtol = 1e-10;
    double drop_tol = 1e-3;
    int max_modes = 0;  // 0: keep every non-trivial mode
    BMethod method = BMethod::Similarity;
    double defect_cond_threshold = 1e10;
};

// generate -> edmd x2 -> spectrum -> realify -> control_matrix, on
// equilibrium-centered data.
BilinearModel fit_bilinear_model(const TrajectoryDataset& data0, const TrajectoryDataset& data1,
                                 const Dictionary& dict, const Eigen::VectorXd& x_star,
                                 const FitOptions& opts = {});

}  // namespace koopstab
