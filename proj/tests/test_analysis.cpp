#include <doctest.h>

#include <cmath>

#include "koopstab/analysis.hpp"
#include "koopstab/errors.hpp"

using namespace koopstab;

namespace {

BilinearModel toy_model() {
    BilinearModel m;
    m.Lambda = Eigen::MatrixXd::Zero(3, 3);
    m.Lambda(0, 0) = -1.0;
    m.Lambda.block(1, 1, 2, 2) << -0.5, 2.0, -2.0, -0.5;
    m.B = Eigen::MatrixXd::Identity(3, 3);
    m.V_r = Eigen::MatrixXd::Identity(3, 10);
    m.eigs = Eigen::VectorXcd(3);
    m.eigs << std::complex<double>(-1.0, 0.0), std::complex<double>(-0.5, 2.0),
        std::complex<double>(-0.5, -2.0);
    m.dict = build_dictionary(2, 3);
    m.x_star = Eigen::VectorXd::Zero(2);
    m.delta_t = 0.1;
    m.finalize();
    return m;
}

SweepOptions duffing_sweep_options(int trials, std::vector<int> lengths) {
    SweepOptions so;
    so.lengths = std::move(lengths);
    so.num_ics = 10;
    so.ref_length = 50;
    so.trials = trials;
    so.seed = 31337;
    so.ic_box = {{-1.5, 1.5}, {-1.0, 1.0}};
    so.delta_t = 0.25;
    so.noise_var = 0.01;
    so.substeps = 25;
    return so;
}

}  // namespace

TEST_CASE("model error on identical and perturbed models") {
    const BilinearModel a = toy_model();
    SUBCASE("identity") {
        const auto [le, be] = model_error(a, a);
        CHECK(le == 0.0);
        CHECK(be == 0.0);
    }
    SUBCASE("shifting one eigenvalue by 0.1 moves the metric by 0.1") {
        BilinearModel b = toy_model();
        b.Lambda(0, 0) += 0.1;
        b.eigs[0] += 0.1;
        const auto [le, be] = model_error(a, b);
        CHECK(le == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(be == 0.0);
    }
    SUBCASE("alignment works under block permutation") {
        BilinearModel b = toy_model();
        // swap the real mode and the pair
        b.Lambda = Eigen::MatrixXd::Zero(3, 3);
        b.Lambda.block(0, 0, 2, 2) << -0.5, 2.0, -2.0, -0.5;
        b.Lambda(2, 2) = -1.0;
        b.B = Eigen::MatrixXd::Identity(3, 3);
        b.eigs << std::complex<double>(-0.5, 2.0), std::complex<double>(-0.5, -2.0),
            std::complex<double>(-1.0, 0.0);
        const auto [le, be] = model_error(a, b);
        CHECK(le == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(be == 0.0);
    }
    SUBCASE("mode count mismatch raises an alignment error") {
        BilinearModel b = toy_model();
        b.Lambda = Eigen::MatrixXd::Constant(1, 1, -1.0);
        b.B = Eigen::MatrixXd::Identity(1, 1);
        b.eigs = Eigen::VectorXcd::Constant(1, std::complex<double>(-1.0, 0.0));
        CHECK_THROWS_AS(model_error(a, b), AlignmentError);
    }
}

TEST_CASE("duffing fits from different seeds give finite errors") {
    const auto duf = duffing();
    const Dictionary dict = build_dictionary(2, 5);
    const IcBox box = {{-1.5, 1.5}, {-1.0, 1.0}};
    FitOptions fo;
    auto make = [&](std::uint64_t seed, int steps) {
        const TrajectoryDataset d0 =
            generate_dataset(duf, 10, box, 0, 0.01, 0.25, steps * 0.25, 25, seed);
        const TrajectoryDataset d1 =
            generate_dataset(duf, 10, box, 1, 0.01, 0.25, steps * 0.25, 25, seed + 1);
        return fit_bilinear_model(d0, d1, dict, duf.equilibrium, fo);
    };
    const BilinearModel ref = make(1000, 50);
    const BilinearModel m30 = make(2000, 30);
    const auto [le, be] = model_error(ref, m30);
    CHECK(std::isfinite(le));
    CHECK(std::isfinite(be));
    CHECK(le > 0.0);
    CHECK(be > 0.0);
}

TEST_CASE("sweep reproduces the reference at T = ref_length") {
    SweepOptions so = duffing_sweep_options(2, {10, 50});
    const ErrorCurve curve = sample_complexity_sweep(duffing(), build_dictionary(2, 5), so);
    REQUIRE(curve.lengths.size() == 2);
    CHECK(curve.lambda_err[1] == 0.0);
    CHECK(curve.b_err[1] == 0.0);
    CHECK(curve.lambda_err[0] > 0.0);
}

TEST_CASE("sweep decays and is bit-reproducible") {
    SweepOptions so = duffing_sweep_options(10, {6, 12, 20, 30});
    const ErrorCurve a = sample_complexity_sweep(duffing(), build_dictionary(2, 5), so);
    CHECK(a.lambda_err[a.lengths.size() - 1] <= a.lambda_err[0]);

    const ErrorCurve b = sample_complexity_sweep(duffing(), build_dictionary(2, 5), so);
    CHECK((a.lambda_err - b.lambda_err).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.b_err - b.b_err).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.slope_lambda == b.slope_lambda);
}
