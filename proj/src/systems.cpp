#include "koopstab/systems.hpp"

#include <cmath>

#include "koopstab/errors.hpp"
#include "koopstab/parallel.hpp"
#include "koopstab/rng.hpp"

namespace koopstab {

Eigen::VectorXd eval_rhs(const ControlAffineSystem& sys, const Eigen::VectorXd& x, double u) {
    Eigen::VectorXd r = sys.drift(x) + sys.input_field(x) * u;
    for (Eigen::Index i = 0; i < r.size(); ++i)
        if (!std::isfinite(r[i]))
            throw NumericalDomainError(sys.name + ": non-finite rhs component " + std::to_string(i));
    return r;
}

ControlAffineSystem duffing() {
    ControlAffineSystem sys;
    sys.name = "duffing";
    sys.n = 2;
    sys.params = {{"damping", 0.5}};
    sys.drift = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd f(2);
        f[0] = x[1];
        f[1] = x[0] - x[0] * x[0] * x[0] - 0.5 * x[1];
        return f;
    };
    sys.input_field = [](const Eigen::VectorXd&) {
        Eigen::VectorXd g(2);
        g << 0.0, 1.0;
        return g;
    };
    sys.equilibrium = Eigen::VectorXd::Zero(2);
    return sys;
}

ControlAffineSystem lorenz(double rho, double sigma, double beta) {
    ControlAffineSystem sys;
    sys.name = "lorenz";
    sys.n = 3;
    sys.params = {{"rho", rho}, {"sigma", sigma}, {"beta", beta}};
    sys.drift = [rho, sigma, beta](const Eigen::VectorXd& x) {
        Eigen::VectorXd f(3);
        f[0] = sigma * (x[1] - x[0]);
        f[1] = x[0] * (rho - x[2]) - x[1];
        f[2] = x[0] * x[1] - beta * x[2];
        return f;
    };
    sys.input_field = [](const Eigen::VectorXd&) {
        Eigen::VectorXd g(3);
        g << 0.0, 1.0, 0.0;
        return g;
    };
    const double c = std::sqrt(beta * (rho - 1.0));
    Eigen::VectorXd eq(3);
    eq << c, c, rho - 1.0;
    sys.equilibrium = eq;
    return sys;
}

ControlAffineSystem nine_bus(const NineBusParams& p) {
    ControlAffineSystem sys;
    sys.name = "ninebus";
    sys.n = 6;

    Eigen::Matrix3d coupling = Eigen::Matrix3d::Zero();
    coupling(0, 1) = coupling(1, 0) = p.emf[0] * p.emf[1] / p.x12;
    coupling(0, 2) = coupling(2, 0) = p.emf[0] * p.emf[2] / p.x13;
    coupling(1, 2) = coupling(2, 1) = p.emf[1] * p.emf[2] / p.x23;

    // Loads chosen so the configured angles are an exact equilibrium.
    Eigen::Vector3d load;
    for (int i = 0; i < 3; ++i) {
        double pe = 0.0;
        for (int j = 0; j < 3; ++j)
            if (j != i) pe += coupling(i, j) * std::sin(p.delta_star[i] - p.delta_star[j]);
        load[i] = p.mech_power[i] - pe;
    }

    const Eigen::Vector3d inertia = p.inertia, damping = p.damping, pm = p.mech_power;
    const double omega_s = p.omega_s;
    sys.drift = [coupling, inertia, damping, pm, load, omega_s](const Eigen::VectorXd& x) {
        Eigen::VectorXd f(6);
        for (int i = 0; i < 3; ++i) {
            f[i] = x[3 + i] - omega_s;
            double pe = 0.0;
            for (int j = 0; j < 3; ++j)
                if (j != i) pe += coupling(i, j) * std::sin(x[i] - x[j]);
            f[3 + i] = (pm[i] - load[i] - pe - damping[i] * (x[3 + i] - omega_s)) / inertia[i];
        }
        return f;
    };
    const int input_gen = p.input_generator;
    sys.input_field = [input_gen](const Eigen::VectorXd&) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(6);
        g[3 + input_gen] = 1.0;
        return g;
    };
    Eigen::VectorXd eq(6);
    eq << p.delta_star[0], p.delta_star[1], p.delta_star[2], omega_s, omega_s, omega_s;
    sys.equilibrium = eq;
    sys.params = {{"omega_s", omega_s},
                  {"x12", p.x12},
                  {"x13", p.x13},
                  {"x23", p.x23},
                  {"input_generator", static_cast<double>(input_gen)},
                  {"load1", load[0]},
                  {"load2", load[1]},
                  {"load3", load[2]}};
    return sys;
}

namespace {

void check_finite(const Eigen::VectorXd& x, double t, double blow_up) {
    double nrm = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) throw DivergenceError(t, "non-finite state");
        nrm += x[i] * x[i];
    }
    if (std::sqrt(nrm) > blow_up) throw DivergenceError(t, "state norm exceeded blow-up bound");
}

}  // namespace

Trajectory integrate_sde(const ControlAffineSystem& sys, const Eigen::VectorXd& x0, int s,
                         double noise_var, double delta_t, double horizon, int substeps,
                         std::uint64_t seed, double blow_up) {
    if (delta_t <= 0.0) throw Error("integrate_sde: delta_t must be positive");
    if (substeps < 1) throw Error("integrate_sde: substeps must be >= 1");
    if (noise_var < 0.0) throw Error("integrate_sde: noise_var must be >= 0");

    Rng rng(seed);
    const double h = delta_t / substeps;
    const double noise_scale = std::sqrt(noise_var * h);
    const int samples = static_cast<int>(std::round(horizon / delta_t));

    Trajectory traj;
    traj.delta_t = delta_t;
    traj.seed = seed;
    traj.states.reserve(samples + 1);
    traj.states.push_back(x0);
    Eigen::VectorXd x = x0;
    double t = 0.0;
    for (int k = 0; k < samples; ++k) {
        for (int sub = 0; sub < substeps; ++sub) {
            Eigen::VectorXd dx = sys.drift(x) + sys.input_field(x) * static_cast<double>(s);
            x += h * dx;
            if (noise_scale > 0.0)
                for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += noise_scale * rng.normal();
            t += h;
            check_finite(x, t, blow_up);
        }
        traj.states.push_back(x);
        traj.inputs.push_back(static_cast<double>(s));
    }
    return traj;
}

Trajectory integrate_ode(const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& rhs,
                         const Eigen::VectorXd& x0, double dt, double horizon, double blow_up) {
    if (dt <= 0.0) throw Error("integrate_ode: dt must be positive");
    const int samples = static_cast<int>(std::round(horizon / dt));
    Trajectory traj;
    traj.delta_t = dt;
    traj.states.reserve(samples + 1);
    traj.states.push_back(x0);
    Eigen::VectorXd x = x0;
    for (int k = 0; k < samples; ++k) {
        const double t = k * dt;
        const Eigen::VectorXd k1 = rhs(t, x);
        const Eigen::VectorXd k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1);
        const Eigen::VectorXd k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2);
        const Eigen::VectorXd k4 = rhs(t + dt, x + dt * k3);
        x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        check_finite(x, t + dt, blow_up);
        traj.states.push_back(x);
        traj.inputs.push_back(0.0);
    }
    return traj;
}

TrajectoryDataset dataset_from_trajectories(const std::vector<Trajectory>& trajs, int s,
                                            double delta_t, const DatasetMeta& meta) {
    Eigen::Index total = 0;
    for (const auto& tr : trajs) total += static_cast<Eigen::Index>(tr.states.size()) - 1;
    const int n = trajs.empty() || trajs[0].states.empty() ? 0 : static_cast<int>(trajs[0].states[0].size());

    TrajectoryDataset ds;
    ds.input_mode = s;
    ds.delta_t = delta_t;
    ds.meta = meta;
    ds.X.resize(n, total);
    ds.Y.resize(n, total);
    ds.pair_traj.reserve(total);
    ds.pair_step.reserve(total);
    Eigen::Index col = 0;
    for (std::size_t ti = 0; ti < trajs.size(); ++ti) {
        const auto& st = trajs[ti].states;
        for (std::size_t k = 0; k + 1 < st.size(); ++k) {
            ds.X.col(col) = st[k];
            ds.Y.col(col) = st[k + 1];
            ds.pair_traj.push_back(static_cast<int>(ti));
            ds.pair_step.push_back(static_cast<int>(k));
            ++col;
        }
    }
    return ds;
}

TrajectoryDataset generate_dataset(const ControlAffineSystem& sys, int num_ics, const IcBox& ic_box,
                                   int s, double noise_var, double delta_t, double horizon,
                                   int substeps, std::uint64_t seed, double blow_up) {
    if (num_ics < 1) throw Error("generate_dataset: num_ics must be >= 1");
    if (ic_box.size() != static_cast<std::size_t>(sys.n))
        throw Error("generate_dataset: ic_box must have one interval per state dimension");

    std::vector<Trajectory> trajs(num_ics);
    std::vector<std::string> failures(num_ics);
    parallel_for(static_cast<std::size_t>(num_ics), [&](std::size_t i) {
        Rng ic_rng = Rng::stream(seed, 2 * i);
        Eigen::VectorXd x0(sys.n);
        for (int d = 0; d < sys.n; ++d) x0[d] = ic_rng.uniform(ic_box[d].first, ic_box[d].second);
        try {
            trajs[i] = integrate_sde(sys, x0, s, noise_var, delta_t, horizon, substeps,
                                     splitmix64(seed ^ splitmix64(2 * i + 1)), blow_up);
        } catch (const DivergenceError& e) {
            failures[i] = "initial condition " + std::to_string(i) + ": " + e.what();
        }
    });
    for (const auto& f : failures)
        if (!f.empty()) throw DivergenceError(0.0, "generate_dataset: " + f);

    DatasetMeta meta;
    meta.system = sys.name;
    meta.noise_var = noise_var;
    meta.seed = seed;
    meta.num_ics = num_ics;
    meta.substeps = substeps;
    meta.horizon = horizon;
    return dataset_from_trajectories(trajs, s, delta_t, meta);
}

TrajectoryDataset TrajectoryDataset::shifted(const Eigen::VectorXd& shift) const {
    TrajectoryDataset out = *this;
    out.X.colwise() -= shift;
    out.Y.colwise() -= shift;
    return out;
}

}  // namespace koopstab
