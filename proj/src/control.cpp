#include "koopstab/control.hpp"

#include <cmath>

#include "koopstab/errors.hpp"

namespace koopstab {

double feedback(const ControllerSpec& spec, const QuadraticCLF& clf, const BilinearModel& model,
                const Eigen::VectorXd& z) {
    const auto [a, b] = clf_terms(clf.P, model.Lambda, model.B, z);
    double u = 0.0;
    switch (spec.kind) {
        case ControlLaw::Gradient:
            u = -spec.beta * b;
            break;
        case ControlLaw::BangBang:
            u = b > 0.0 ? -spec.gain : (b < 0.0 ? spec.gain : 0.0);
            break;
        case ControlLaw::Sontag: {
            if (std::abs(b) > spec.b_eps) {
                const double q = spec.q_coeff * z.squaredNorm();
                u = -(a + std::sqrt(a * a + q * b * b)) / b;
            }
            break;
        }
    }
    if (spec.saturation) {
        const double s = *spec.saturation;
        u = std::clamp(u, -s, s);
    }
    return u;
}

Eigen::VectorXd closed_loop_rhs(const ControlAffineSystem& sys, const BilinearModel& model,
                                const QuadraticCLF& clf, const ControllerSpec& spec,
                                const Eigen::VectorXd& x) {
    const double u = feedback(spec, clf, model, lift(model, x));
    return sys.drift(x) + sys.input_field(x) * u;
}

namespace {

SimulationResult simulate(const ControlAffineSystem& sys, const BilinearModel& model,
                          const QuadraticCLF& clf, const ControllerSpec* spec,
                          const Eigen::VectorXd& x0, double dt, double horizon,
                          double convergence_radius, double blow_up) {
    if (dt <= 0.0) throw Error("simulate: dt must be positive");
    const int samples = static_cast<int>(std::round(horizon / dt));
    SimulationResult res;
    res.times.resize(samples + 1);
    res.states.resize(sys.n, samples + 1);
    res.lifted.resize(model.n_modes(), samples + 1);
    res.controls.resize(samples + 1);
    res.lyapunov.resize(samples + 1);

    Eigen::VectorXd psi, z;
    auto control_at = [&](const Eigen::VectorXd& x) {
        lift_into(model, x, psi, z);
        return spec ? feedback(*spec, clf, model, z) : 0.0;
    };
    auto rhs = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return sys.drift(x) + sys.input_field(x) * control_at(x);
    };

    Eigen::VectorXd x = x0;
    for (int k = 0; k <= samples; ++k) {
        const double u = control_at(x);  // z is fresh after this call
        res.times[k] = k * dt;
        res.states.col(k) = x;
        res.lifted.col(k) = z;
        res.controls[k] = u;
        res.lyapunov[k] = z.dot(clf.P * z);
        if (k == samples) break;
        const Eigen::VectorXd k1 = rhs(x);
        const Eigen::VectorXd k2 = rhs(x + 0.5 * dt * k1);
        const Eigen::VectorXd k3 = rhs(x + 0.5 * dt * k2);
        const Eigen::VectorXd k4 = rhs(x + dt * k3);
        x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite() || x.norm() > blow_up)
            throw DivergenceError((k + 1) * dt, "simulate: closed-loop state diverged");
    }
    res.final_distance = (x - sys.equilibrium).norm();
    res.converged = res.final_distance < convergence_radius;
    return res;
}

}  // namespace

SimulationResult simulate_closed_loop(const ControlAffineSystem& sys, const BilinearModel& model,
                                      const QuadraticCLF& clf, const ControllerSpec& spec,
                                      const Eigen::VectorXd& x0, double dt, double horizon,
                                      double convergence_radius, double blow_up) {
    return simulate(sys, model, clf, &spec, x0, dt, horizon, convergence_radius, blow_up);
}

SimulationResult simulate_open_loop(const ControlAffineSystem& sys, const BilinearModel& model,
                                    const QuadraticCLF& clf, const Eigen::VectorXd& x0, double dt,
                                    double horizon, double convergence_radius, double blow_up) {
    return simulate(sys, model, clf, nullptr, x0, dt, horizon, convergence_radius, blow_up);
}

}  // namespace koopstab
