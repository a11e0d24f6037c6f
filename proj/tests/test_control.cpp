#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "koopstab/control.hpp"
#include "koopstab/rng.hpp"

using namespace koopstab;

namespace {

// One-mode model whose lifted state is simply x (dictionary {1, x}).
BilinearModel scalar_model(double lambda, double b) {
    BilinearModel m;
    m.Lambda = Eigen::MatrixXd::Constant(1, 1, lambda);
    m.B = Eigen::MatrixXd::Constant(1, 1, b);
    m.V_r = Eigen::MatrixXd::Zero(1, 2);
    m.V_r(0, 1) = 1.0;
    m.eigs = Eigen::VectorXcd::Constant(1, lambda);
    m.dict = build_dictionary(1, 1);
    m.x_star = Eigen::VectorXd::Zero(1);
    m.delta_t = 0.1;
    m.finalize();
    return m;
}

QuadraticCLF identity_clf(int n) {
    QuadraticCLF clf;
    clf.P = Eigen::MatrixXd::Identity(n, n);
    clf.c_min = 0.5;
    clf.c_max = 2.0;
    return clf;
}

BilinearModel two_mode_model(const Eigen::MatrixXd& L, const Eigen::MatrixXd& B) {
    BilinearModel m;
    m.Lambda = L;
    m.B = B;
    m.V_r = Eigen::MatrixXd::Zero(2, 3);
    m.V_r(0, 1) = 1.0;
    m.V_r(1, 2) = 1.0;
    m.eigs = Eigen::VectorXcd::Zero(2);
    m.dict = build_dictionary(2, 1);
    m.x_star = Eigen::VectorXd::Zero(2);
    m.delta_t = 0.1;
    m.finalize();
    return m;
}

}  // namespace

TEST_CASE("feedback closed forms") {
    Eigen::MatrixXd L(2, 2);
    L << 0, 1, -1, 0;  // a(z) == 0 for P = I
    const QuadraticCLF clf = identity_clf(2);

    SUBCASE("sontag with a=0, b=1, q=1 gives u=-1") {
        const BilinearModel m = two_mode_model(L, 0.5 * Eigen::MatrixXd::Identity(2, 2));
        ControllerSpec spec;
        spec.kind = ControlLaw::Sontag;
        spec.q_coeff = 1.0;
        Eigen::VectorXd z(2);
        z << 1.0, 0.0;  // b = z'(2*0.5*I)z = 1, q = 1
        CHECK(feedback(spec, clf, m, z) == doctest::Approx(-1.0).epsilon(1e-12));
    }
    SUBCASE("all laws return zero control when b vanishes") {
        const BilinearModel m = two_mode_model(L, Eigen::MatrixXd::Zero(2, 2));
        Eigen::VectorXd z(2);
        z << 0.7, -0.4;
        for (ControlLaw kind : {ControlLaw::Gradient, ControlLaw::BangBang, ControlLaw::Sontag}) {
            ControllerSpec spec;
            spec.kind = kind;
            CHECK(feedback(spec, clf, m, z) == 0.0);
        }
    }
    SUBCASE("gradient law arithmetic") {
        const BilinearModel m = two_mode_model(L, Eigen::MatrixXd::Identity(2, 2));
        ControllerSpec spec;
        spec.kind = ControlLaw::Gradient;
        spec.beta = 3.0;
        Eigen::VectorXd z(2);
        z << 1.0, 0.0;  // b = 2
        CHECK(feedback(spec, clf, m, z) == doctest::Approx(-6.0));
    }
    SUBCASE("bang-bang sign and saturation") {
        const BilinearModel m = two_mode_model(L, Eigen::MatrixXd::Identity(2, 2));
        ControllerSpec spec;
        spec.kind = ControlLaw::BangBang;
        spec.gain = 4.0;
        Eigen::VectorXd z(2);
        z << 1.0, 0.0;
        CHECK(feedback(spec, clf, m, z) == doctest::Approx(-4.0));
        spec.saturation = 1.5;
        CHECK(feedback(spec, clf, m, z) == doctest::Approx(-1.5));
    }
}

TEST_CASE("sontag decrease identity on random samples") {
    Rng rng(99);
    int checked = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform(0.0, 3.0));
        Eigen::MatrixXd P(n, n), L(n, n), B(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                P(i, j) = rng.uniform(-1.0, 1.0);
                L(i, j) = rng.uniform(-2.0, 2.0);
                B(i, j) = rng.uniform(-2.0, 2.0);
            }
        P = (0.5 * (P + P.transpose()) + 2.0 * Eigen::MatrixXd::Identity(n, n)).eval();
        const Eigen::VectorXd z = rng.normal_vector(n);
        const auto [a, b] = clf_terms(P, L, B, z);
        if (std::abs(b) <= 1e-9) continue;
        ++checked;
        const double q = 10.0 * z.squaredNorm();
        const double u = -(a + std::sqrt(a * a + q * b * b)) / b;
        const double vdot = a + b * u;
        const double expect = -std::sqrt(a * a + q * b * b);
        CHECK(std::abs(vdot - expect) <= 1e-9 * std::max(1.0, std::abs(expect)));
        CHECK(vdot <= -std::abs(a) + 1e-9 * std::max(1.0, std::abs(a)));
    }
    CHECK(checked > 9000);
}

TEST_CASE("sontag approaches gain -2 for the scalar unstable plant") {
    // z' = z + u z with V = p z^2: a = 2 p z^2 = b, so k -> -2 as z -> 0.
    const BilinearModel m = scalar_model(1.0, 1.0);
    QuadraticCLF clf = identity_clf(1);
    clf.P *= 0.8;
    ControllerSpec spec;
    spec.kind = ControlLaw::Sontag;
    spec.q_coeff = 1.0;
    Eigen::VectorXd z(1);
    z << 1e-4;
    CHECK(std::abs(feedback(spec, clf, m, z) + 2.0) < 1e-3);
}

TEST_CASE("closed-loop rhs") {
    const auto duf = duffing();
    Eigen::MatrixXd L(2, 2);
    L << -1, 0, 0, -2;
    const BilinearModel m = two_mode_model(L, Eigen::MatrixXd::Identity(2, 2));
    const QuadraticCLF clf = identity_clf(2);
    ControllerSpec spec;
    spec.kind = ControlLaw::Gradient;
    spec.beta = 2.0;

    SUBCASE("equilibrium is invariant for every law") {
        for (ControlLaw kind : {ControlLaw::Gradient, ControlLaw::BangBang, ControlLaw::Sontag}) {
            ControllerSpec s2;
            s2.kind = kind;
            CHECK(closed_loop_rhs(duf, m, clf, s2, duf.equilibrium).norm() <= 1e-9);
        }
    }
    SUBCASE("matches the hand-composed chain at a generic point") {
        Eigen::VectorXd x(2);
        x << 0.1, 0.0;
        const Eigen::VectorXd z = lift(m, x);
        const auto [a, b] = clf_terms(clf.P, m.Lambda, m.B, z);
        const double u = -spec.beta * b;
        Eigen::VectorXd expect = duf.drift(x);
        expect[1] += u;
        CHECK((closed_loop_rhs(duf, m, clf, spec, x) - expect).norm() < 1e-14);
        (void)a;
    }
}

TEST_CASE("simulation basics") {
    const auto duf = duffing();
    Eigen::MatrixXd L(2, 2);
    L << -1, 0, 0, -2;
    const BilinearModel m = two_mode_model(L, Eigen::MatrixXd::Identity(2, 2));
    const QuadraticCLF clf = identity_clf(2);
    ControllerSpec spec;
    spec.kind = ControlLaw::Gradient;
    spec.beta = 0.5;
    spec.saturation = 0.8;

    SUBCASE("starting at the target stays there") {
        const SimulationResult res =
            simulate_closed_loop(duf, m, clf, spec, duf.equilibrium, 1e-2, 2.0, 0.05);
        CHECK(res.converged);
        CHECK(res.controls.cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(res.lyapunov.cwiseAbs().maxCoeff() <= 1e-18);
        for (Eigen::Index k = 0; k < res.times.size(); ++k)
            CHECK((res.states.col(k) - duf.equilibrium).norm() <= 1e-12);
    }
    SUBCASE("saturation bound holds along the run and V stays nonnegative") {
        Eigen::VectorXd x0(2);
        x0 << 1.2, -0.5;
        const SimulationResult res = simulate_closed_loop(duf, m, clf, spec, x0, 1e-2, 5.0, 0.05);
        CHECK(res.controls.cwiseAbs().maxCoeff() <= 0.8 + 1e-12);
        CHECK(res.lyapunov.minCoeff() >= 0.0);
        CHECK(res.times.size() == res.controls.size());
        CHECK(res.states.cols() == res.times.size());
    }
    SUBCASE("open loop applies zero control") {
        Eigen::VectorXd x0(2);
        x0 << 0.5, 0.1;
        const SimulationResult res = simulate_open_loop(duf, m, clf, x0, 1e-2, 2.0, 0.05);
        CHECK(res.controls.cwiseAbs().maxCoeff() == 0.0);
    }
}
