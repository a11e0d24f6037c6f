#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <unsupported/Eigen/MatrixFunctions>

#include "koopstab/errors.hpp"
#include "koopstab/koopman.hpp"
#include "koopstab/rng.hpp"

using namespace koopstab;

namespace {

TrajectoryDataset pairs_dataset(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double dt) {
    TrajectoryDataset ds;
    ds.input_mode = 0;
    ds.delta_t = dt;
    ds.X = X;
    ds.Y = Y;
    ds.pair_traj.assign(X.cols(), 0);
    ds.pair_step.resize(X.cols());
    for (Eigen::Index i = 0; i < X.cols(); ++i) ds.pair_step[i] = static_cast<int>(i);
    return ds;
}

// Snapshot pairs of the exact flow of x' = Mx + b s over one interval.
std::pair<TrajectoryDataset, TrajectoryDataset> linear_plant_data(const Eigen::MatrixXd& M,
                                                                  const Eigen::VectorXd& b,
                                                                  double dt, int samples,
                                                                  std::uint64_t seed) {
    const int n = static_cast<int>(M.rows());
    const Eigen::MatrixXd R = (M * dt).exp();
    const Eigen::VectorXd d = M.inverse() * (R - Eigen::MatrixXd::Identity(n, n)) * b;
    Rng rng(seed);
    Eigen::MatrixXd X(n, samples), Y0(n, samples), Y1(n, samples);
    for (int k = 0; k < samples; ++k) {
        for (int i = 0; i < n; ++i) X(i, k) = rng.uniform(-1.0, 1.0);
        Y0.col(k) = R * X.col(k);
        Y1.col(k) = R * X.col(k) + d;
    }
    auto d0 = pairs_dataset(X, Y0, dt);
    auto d1 = pairs_dataset(X, Y1, dt);
    d1.input_mode = 1;
    return {d0, d1};
}

KoopmanApprox synthetic_approx(const Eigen::MatrixXd& U, double dt) {
    KoopmanApprox ka;
    ka.U = U;
    ka.G = Eigen::MatrixXd::Identity(U.rows(), U.cols());
    ka.A = U;
    ka.delta_t = dt;
    return ka;
}

Eigen::MatrixXd rot2(double r, double theta) {
    Eigen::MatrixXd m(2, 2);
    m << r * std::cos(theta), r * std::sin(theta), -r * std::sin(theta), r * std::cos(theta);
    return m;
}

}  // namespace

TEST_CASE("edmd recovers an exact linear contraction") {
    Rng rng(5);
    Eigen::MatrixXd X(1, 40), Y(1, 40);
    for (int k = 0; k < 40; ++k) {
        X(0, k) = rng.uniform(-2.0, 2.0);
        Y(0, k) = 0.5 * X(0, k);
    }
    const Dictionary dict = build_dictionary(1, 1);
    const KoopmanApprox ka = edmd_fit(pairs_dataset(X, Y, 0.1), dict);
    Eigen::MatrixXd expect(2, 2);
    expect << 1, 0, 0, 0.5;
    CHECK((ka.U - expect).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("identity data gives GU = G") {
    Rng rng(6);
    Eigen::MatrixXd X(2, 60);
    for (int k = 0; k < 60; ++k)
        for (int i = 0; i < 2; ++i) X(i, k) = rng.uniform(-1.0, 1.0);
    const Dictionary dict = build_dictionary(2, 3);
    const KoopmanApprox ka = edmd_fit(pairs_dataset(X, X, 0.1), dict);
    CHECK((ka.G * ka.U - ka.G).norm() <= 1e-12 * ka.G.norm());
}

TEST_CASE("normal equations hold even for rank-deficient data") {
    // All snapshots on a line: the degree-2 Gram in 2 variables is singular.
    Rng rng(8);
    Eigen::MatrixXd X(2, 50), Y(2, 50);
    for (int k = 0; k < 50; ++k) {
        const double t = rng.uniform(-1.0, 1.0);
        X.col(k) << t, 2.0 * t;
        Y.col(k) = 0.8 * X.col(k);
    }
    const Dictionary dict = build_dictionary(2, 2);
    const KoopmanApprox ka = edmd_fit(pairs_dataset(X, Y, 0.1), dict);
    CHECK(ka.diag.truncated > 0);
    const Eigen::MatrixXd resid = ka.G.transpose() * (ka.G * ka.U - ka.A);
    CHECK(resid.norm() <= 1e-8 * ka.A.norm());
}

TEST_CASE("spectrum closed forms") {
    SUBCASE("diagonal") {
        Eigen::MatrixXd U = Eigen::MatrixXd::Zero(2, 2);
        U(0, 0) = 1.0;
        U(1, 1) = 0.8825;
        const Spectrum sp = spectrum(synthetic_approx(U, 0.25));
        // sorted by |log(lambda)/dt|: constant first
        CHECK(std::abs(sp.cont_eigenvalues[0]) < 1e-14);
        CHECK(sp.cont_eigenvalues[1].real() ==
              doctest::Approx(std::log(0.8825) / 0.25).epsilon(1e-12));
        CHECK(std::abs(sp.cont_eigenvalues[1].real() - (-0.5)) < 1e-4);
    }
    SUBCASE("identity") {
        const Spectrum sp = spectrum(synthetic_approx(Eigen::MatrixXd::Identity(3, 3), 0.1));
        for (int i = 0; i < 3; ++i) CHECK(std::abs(sp.cont_eigenvalues[i]) < 1e-12);
    }
    SUBCASE("damped rotation") {
        const Spectrum sp = spectrum(synthetic_approx(rot2(0.99, 0.1), 0.01));
        CHECK(sp.kind[0] == ModeKind::PairFirst);
        CHECK(sp.cont_eigenvalues[0].real() == doctest::Approx(std::log(0.99) / 0.01).epsilon(1e-10));
        CHECK(sp.cont_eigenvalues[0].imag() == doctest::Approx(0.1 / 0.01).epsilon(1e-10));
    }
    SUBCASE("eigen relation and ordering invariants") {
        Rng rng(12);
        Eigen::MatrixXd U(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) U(i, j) = rng.uniform(-0.3, 0.3);
        U += 0.9 * Eigen::MatrixXd::Identity(4, 4);
        const Spectrum sp = spectrum(synthetic_approx(U, 0.1));
        for (int i = 0; i < 4; ++i) {
            const Eigen::VectorXcd v = sp.eigenvectors.col(i);
            CHECK((U * v - sp.eigenvalues[i] * v).norm() <= 1e-6 * v.norm());
            if (sp.kind[i] == ModeKind::PairFirst) {
                CHECK(sp.eigenvalues[i].imag() > 0.0);
                CHECK(sp.kind[i + 1] == ModeKind::PairSecond);
                CHECK(sp.eigenvalues[i + 1] == std::conj(sp.eigenvalues[i]));
            }
        }
    }
}

TEST_CASE("negative real axis raises sampling-too-coarse") {
    Eigen::MatrixXd U = Eigen::MatrixXd::Identity(2, 2);
    U(1, 1) = -0.4;
    CHECK_THROWS_AS(spectrum(synthetic_approx(U, 0.1)), SamplingTooCoarseError);
}

TEST_CASE("realify block forms") {
    SUBCASE("real mode") {
        Eigen::MatrixXd U(1, 1);
        U << std::exp(-1.0 * 0.5);
        const RealifiedBasis rb = realify(spectrum(synthetic_approx(U, 0.5)), 0.0);
        REQUIRE(rb.Lambda.rows() == 1);
        CHECK(rb.Lambda(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    }
    SUBCASE("conjugate pair -1 +- 2i") {
        const double dt = 0.25;
        // discrete eigenvalue e^{(-1+2i) dt}
        const double r = std::exp(-1.0 * dt);
        const Eigen::MatrixXd U = rot2(r, 2.0 * dt);
        const RealifiedBasis rb = realify(spectrum(synthetic_approx(U, dt)), 0.0);
        REQUIRE(rb.Lambda.rows() == 2);
        Eigen::MatrixXd expect(2, 2);
        expect << -1, 2, -2, -1;
        CHECK((rb.Lambda - expect).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("constant mode dropped") {
        Eigen::MatrixXd U = Eigen::MatrixXd::Zero(3, 3);
        U(0, 0) = 1.0;
        U(1, 1) = 0.5;
        U(2, 2) = 0.3;
        const RealifiedBasis rb = realify(spectrum(synthetic_approx(U, 1.0)), 1e-3);
        CHECK(rb.Lambda.rows() == 2);  // lambda = 1 with eigenvector e1 excluded
        for (int r = 0; r < 2; ++r) CHECK(rb.Lambda(r, r) < -0.5);
    }
    SUBCASE("realified spectrum preserves retained eigenvalues") {
        Rng rng(21);
        Eigen::MatrixXd U(5, 5);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) U(i, j) = rng.uniform(-0.2, 0.2);
        U += 0.8 * Eigen::MatrixXd::Identity(5, 5);
        const Spectrum sp = spectrum(synthetic_approx(U, 0.2));
        const RealifiedBasis rb = realify(sp, 0.0);
        const Eigen::VectorXcd lam_eigs = Eigen::MatrixXcd(rb.Lambda).eigenvalues();
        // every retained continuous eigenvalue appears in eig(Lambda)
        for (int r = 0; r < rb.Lambda.rows(); ++r) {
            double best = 1e300;
            for (Eigen::Index j = 0; j < lam_eigs.size(); ++j)
                best = std::min(best, std::abs(lam_eigs[j] - rb.row_eigs[r]));
            CHECK(best < 1e-8);
        }
    }
}

TEST_CASE("control matrix: similarity identity and zero case") {
    // U0 with known well-conditioned spectrum via a real block form.
    Rng rng(31);
    Eigen::MatrixXd blocks = Eigen::MatrixXd::Zero(4, 4);
    blocks(0, 0) = 0.9;
    blocks.block(1, 1, 2, 2) = rot2(0.7, 0.3);
    blocks(3, 3) = 0.5;
    Eigen::MatrixXd T(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) T(i, j) = rng.uniform(-1.0, 1.0);
    T += 3.0 * Eigen::MatrixXd::Identity(4, 4);
    const Eigen::MatrixXd U0 = T * blocks * T.inverse();
    const double dt = 0.05;

    const Spectrum sp = spectrum(synthetic_approx(U0, dt));
    const RealifiedBasis rb = realify(sp, 0.0);

    SUBCASE("U1 == U0 gives B == 0") {
        const Eigen::MatrixXd B = control_matrix(synthetic_approx(U0, dt), synthetic_approx(U0, dt),
                                                 rb, BMethod::Similarity);
        CHECK(B.norm() < 1e-12);
    }
    SUBCASE("synthetic generator difference is conjugated exactly") {
        Eigen::MatrixXd C(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) C(i, j) = rng.uniform(-1.0, 1.0);
        // evaluation-convention perturbation: U1 = U0 + dt C^T
        const Eigen::MatrixXd U1 = U0 + dt * C.transpose();
        const Eigen::MatrixXd B = control_matrix(synthetic_approx(U0, dt), synthetic_approx(U1, dt),
                                                 rb, BMethod::Similarity);
        const Eigen::MatrixXd Vr_inv = rb.V_r.inverse();
        const Eigen::MatrixXd expect = rb.V_r * C * Vr_inv;
        CHECK((B - expect).norm() <= 1e-8 * C.norm());
    }
}

TEST_CASE("scalar plant generator difference has the unit entry") {
    // x' = -x + u, dictionary {1, x}: G . grad applied to {1, x} is {0, 1},
    // i.e. the coefficient-convention Bbar puts ~1 in the (1-row, x-column).
    Eigen::MatrixXd M(1, 1);
    M << -1.0;
    Eigen::VectorXd b(1);
    b << 1.0;
    const double dt = 0.01;
    auto [d0, d1] = linear_plant_data(M, b, dt, 200, 3);
    const Dictionary dict = build_dictionary(1, 1);
    const KoopmanApprox u0 = edmd_fit(d0, dict);
    const KoopmanApprox u1 = edmd_fit(d1, dict);
    const Eigen::MatrixXd Bbar = (u1.U - u0.U) / dt;
    CHECK(std::abs(Bbar(0, 1) - 1.0) < 2e-2);
    CHECK(std::abs(Bbar(0, 0)) < 2e-2);
    CHECK(std::abs(Bbar(1, 0)) < 2e-2);
    CHECK(std::abs(Bbar(1, 1)) < 2e-2);
}

TEST_CASE("linear plant: eigenvalue recovery and both B methods") {
    Rng rng(17);
    const int n = 3;
    Eigen::MatrixXd S(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) S(i, j) = rng.uniform(-1.0, 1.0);
    const Eigen::MatrixXd M = S - 2.0 * Eigen::MatrixXd::Identity(n, n);  // stable
    Eigen::VectorXd b(n);
    b << 0.3, -1.0, 0.7;
    const double dt = 1e-3;
    auto [d0, d1] = linear_plant_data(M, b, dt, 400, 11);
    const Dictionary dict = build_dictionary(n, 1);

    SUBCASE("eig(Lambda) matches eig(M) after dropping the constant") {
        FitOptions fo;
        const BilinearModel model = fit_bilinear_model(d0, d1, dict, Eigen::VectorXd::Zero(n), fo);
        REQUIRE(model.n_modes() == n);
        const Eigen::VectorXcd em = M.eigenvalues();
        for (int i = 0; i < n; ++i) {
            double best = 1e300;
            for (int j = 0; j < n; ++j) best = std::min(best, std::abs(model.eigs[i] - em[j]));
            CHECK(best < 1e-4);
        }
    }
    SUBCASE("B methods agree and recover the lifted action (constant retained)") {
        const KoopmanApprox u0 = edmd_fit(d0, dict);
        const KoopmanApprox u1 = edmd_fit(d1, dict);
        const RealifiedBasis rb = realify(spectrum(u0), 0.0);  // keep all modes
        REQUIRE(rb.Lambda.rows() == n + 1);
        const Eigen::MatrixXd Bs = control_matrix(u0, u1, rb, BMethod::Similarity);
        const Eigen::MatrixXd Br = control_matrix(u0, u1, rb, BMethod::Refit);
        // analytic evaluation-convention generator: G.grad {1, x} = {0, b}
        Eigen::MatrixXd Bbar_eval = Eigen::MatrixXd::Zero(n + 1, n + 1);
        Bbar_eval.block(1, 0, n, 1) = b;
        const Eigen::MatrixXd expect = rb.V_r * Bbar_eval * rb.V_r.inverse();
        CHECK((Bs - expect).norm() <= 0.05 * expect.norm());
        CHECK((Br - expect).norm() <= 0.05 * expect.norm());
        CHECK((Bs - Br).norm() <= 0.05 * (0.5 * (Bs + Br)).norm());
    }
}

TEST_CASE("lift vanishes at the equilibrium and scales on a linear mode") {
    Eigen::MatrixXd M(1, 1);
    M << -1.0;
    Eigen::VectorXd b(1);
    b << 1.0;
    auto [d0, d1] = linear_plant_data(M, b, 1e-3, 200, 23);
    const Dictionary dict = build_dictionary(1, 1);
    const BilinearModel model = fit_bilinear_model(d0, d1, dict, Eigen::VectorXd::Zero(1), {});
    REQUIRE(model.n_modes() == 1);
    CHECK(model.eigs[0].real() == doctest::Approx(-1.0).epsilon(1e-6));

    CHECK(lift(model, model.x_star).norm() == 0.0);
    Eigen::VectorXd x(1);
    x << 0.3;
    Eigen::VectorXd one(1);
    one << 1.0;
    const double z03 = lift(model, x)[0];
    const double z1 = lift(model, one)[0];
    CHECK(z03 == doctest::Approx(0.3 * z1).epsilon(1e-9));
}

TEST_CASE("predict closed forms") {
    BilinearModel m;
    m.Lambda = Eigen::MatrixXd::Constant(1, 1, -1.0);
    m.B = Eigen::MatrixXd::Constant(1, 1, 0.0);
    m.V_r = Eigen::MatrixXd::Identity(1, 2);
    m.dict = build_dictionary(1, 1);
    m.x_star = Eigen::VectorXd::Zero(1);
    m.delta_t = 0.1;
    m.finalize();

    SUBCASE("zero input decay") {
        const LiftedTrajectory lt =
            predict(m, Eigen::VectorXd::Ones(1), [](double) { return 0.0; }, 0.001, 1.0);
        CHECK(std::abs(lt.Z(0, lt.Z.cols() - 1) - std::exp(-1.0)) < 1e-8);
    }
    SUBCASE("zero state stays zero") {
        m.B = Eigen::MatrixXd::Constant(1, 1, 2.0);
        const LiftedTrajectory lt =
            predict(m, Eigen::VectorXd::Zero(1), [](double) { return 3.0; }, 0.01, 1.0);
        CHECK(lt.Z.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("constant input exponential") {
        const double a = -1.0, bb = 0.5, c = 2.0;
        m.Lambda = Eigen::MatrixXd::Constant(1, 1, a);
        m.B = Eigen::MatrixXd::Constant(1, 1, bb);
        const LiftedTrajectory lt =
            predict(m, Eigen::VectorXd::Ones(1), [c](double) { return c; }, 0.001, 1.0);
        CHECK(std::abs(lt.Z(0, lt.Z.cols() - 1) - std::exp(a + c * bb)) < 1e-8);
    }
}

TEST_CASE("duffing eigenfunctions satisfy the one-step relation") {
    const auto duf = duffing();
    const IcBox box = {{-1.5, 1.5}, {-1.0, 1.0}};
    const double dt = 0.25;
    // noise-free training data for a sharp residual check
    const TrajectoryDataset d0 = generate_dataset(duf, 20, box, 0, 0.0, dt, 30 * dt, 25, 404);
    const Dictionary dict = build_dictionary(2, 5);
    const KoopmanApprox u0 = edmd_fit(d0, dict);

    // spectral radius stays near the unit circle for bounded dynamics
    const Eigen::VectorXcd evs = u0.U.eigenvalues();
    double rho = 0.0;
    for (Eigen::Index i = 0; i < evs.size(); ++i) rho = std::max(rho, std::abs(evs[i]));
    CHECK(rho <= 1.05);

    const Spectrum sp = spectrum(u0);

    // fresh noise-free trajectory inside the training box
    Eigen::VectorXd x0(2);
    x0 << 0.8, 0.2;
    const Trajectory tr = integrate_sde(duf, x0, 0, 0.0, dt, 30 * dt, 25, 7);
    // The slowest retained eigenfunction tracks the dynamics to 5%; faster
    // modes carry larger dictionary-closure error at this degree.
    Eigen::Index slow = -1;
    double slow_mag = 1e300;
    for (Eigen::Index j = 0; j < sp.eigenvalues.size(); ++j) {
        if (!sp.usable[j] || sp.kind[j] == ModeKind::PairSecond) continue;
        const double mag = std::abs(sp.cont_eigenvalues[j]);
        if (mag < 1e-3) continue;  // trivial constant
        if (mag < slow_mag) {
            slow_mag = mag;
            slow = j;
        }
    }
    REQUIRE(slow >= 0);
    const Eigen::VectorXcd v = sp.eigenvectors.col(slow);
    double max_phi = 0.0, max_resid = 0.0;
    std::complex<double> prev = 0.0;
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
        const std::complex<double> phi =
            v.transpose() * dict.evaluate(tr.states[k]).cast<std::complex<double>>();
        if (k > 0) max_resid = std::max(max_resid, std::abs(phi - sp.eigenvalues[slow] * prev));
        max_phi = std::max(max_phi, std::abs(phi));
        prev = phi;
    }
    CHECK(max_resid <= 0.05 * max_phi);
}
