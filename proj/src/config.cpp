#include "koopstab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "koopstab/errors.hpp"

namespace koopstab {

ControlAffineSystem PipelineConfig::make_system() const {
    auto param = [&](const std::string& k, double dflt) {
        auto it = system_params.find(k);
        return it == system_params.end() ? dflt : it->second;
    };
    ControlAffineSystem sys;
    if (system_name == "duffing") {
        sys = duffing();
    } else if (system_name == "lorenz") {
        sys = lorenz(param("rho", 28.0), param("sigma", 10.0), param("beta", 8.0 / 3.0));
    } else if (system_name == "ninebus") {
        NineBusParams p;
        p.x12 = param("x12", p.x12);
        p.x13 = param("x13", p.x13);
        p.x23 = param("x23", p.x23);
        p.omega_s = param("omega_s", p.omega_s);
        p.input_generator = static_cast<int>(param("input_generator", p.input_generator));
        sys = nine_bus(p);
    } else {
        throw ConfigError("unknown system '" + system_name + "'");
    }
    if (!equilibrium.empty()) {
        if (equilibrium.size() != static_cast<std::size_t>(sys.n))
            throw ConfigError("system.equilibrium has wrong dimension");
        sys.equilibrium = Eigen::Map<const Eigen::VectorXd>(equilibrium.data(), sys.n);
    }
    return sys;
}

Eigen::VectorXd PipelineConfig::target_equilibrium(const ControlAffineSystem& sys) const {
    return sys.equilibrium;
}

namespace {

const std::set<std::string> kSystemParamKeys = {"rho", "sigma", "beta", "x12", "x13",
                                                "x23", "omega_s", "input_generator"};

std::vector<double> parse_doubles(const std::string& s) {
    std::istringstream is(s);
    std::vector<double> out;
    double v;
    while (is >> v) out.push_back(v);
    if (!is.eof()) throw std::invalid_argument(s);
    return out;
}

IcBox parse_box(const std::vector<double>& vals) {
    if (vals.size() % 2 != 0) throw std::invalid_argument("box needs lo/hi pairs");
    IcBox box;
    for (std::size_t i = 0; i < vals.size(); i += 2) box.emplace_back(vals[i], vals[i + 1]);
    return box;
}

}  // namespace

PipelineConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);

    PipelineConfig cfg;
    cfg.ic_box.clear();
    std::string line;
    int lineno = 0;
    bool saturation_set = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto nonblank = line.find_first_not_of(" \t\r");
        if (nonblank == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError(path, lineno, "expected 'key = value'");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
        };
        trim(key);
        trim(val);

        try {
            if (key == "system.name") cfg.system_name = val;
            else if (key == "system.equilibrium") cfg.equilibrium = parse_doubles(val);
            else if (key.rfind("system.", 0) == 0) {
                const std::string pkey = key.substr(7);
                if (!kSystemParamKeys.count(pkey))
                    throw FormatError(path, lineno, "unknown key '" + key + "'");
                cfg.system_params[pkey] = std::stod(val);
            }
            else if (key == "data.num_ics") cfg.num_ics = std::stoi(val);
            else if (key == "data.ic_box") cfg.ic_box = parse_box(parse_doubles(val));
            else if (key == "data.delta_t") cfg.delta_t = std::stod(val);
            else if (key == "data.horizon") cfg.horizon = std::stod(val);
            else if (key == "data.noise_var") cfg.noise_var = std::stod(val);
            else if (key == "data.substeps") cfg.substeps = std::stoi(val);
            else if (key == "data.seed") cfg.seed = std::stoull(val);
            else if (key == "dict.degree") cfg.degree = std::stoi(val);
            else if (key == "dict.svd_rtol") cfg.svd_rtol = std::stod(val);
            else if (key == "dict.drop_tol") cfg.drop_tol = std::stod(val);
            else if (key == "dict.max_modes") cfg.max_modes = std::stoi(val);
            else if (key == "dict.b_method") {
                if (val == "similarity") cfg.b_method = BMethod::Similarity;
                else if (val == "refit") cfg.b_method = BMethod::Refit;
                else throw FormatError(path, lineno, "dict.b_method must be similarity|refit");
            }
            else if (key == "clf.gammas") cfg.gamma_ladder = parse_doubles(val);
            else if (key == "clf.init_s") cfg.init_s = parse_doubles(val);
            else if (key == "clf.c_min") cfg.c_min = std::stod(val);
            else if (key == "clf.c_max") cfg.c_max = std::stod(val);
            else if (key == "clf.max_iters") cfg.max_iters = std::stoi(val);
            else if (key == "clf.seed") cfg.clf_seed = std::stoull(val);
            else if (key == "clf.check_samples") cfg.check_samples = std::stoi(val);
            else if (key == "clf.check_tau") cfg.check_tau = std::stod(val);
            else if (key == "ctrl.kind") {
                if (val == "gradient") cfg.controller.kind = ControlLaw::Gradient;
                else if (val == "bangbang") cfg.controller.kind = ControlLaw::BangBang;
                else if (val == "sontag") cfg.controller.kind = ControlLaw::Sontag;
                else throw FormatError(path, lineno, "ctrl.kind must be gradient|bangbang|sontag");
            }
            else if (key == "ctrl.beta") cfg.controller.beta = std::stod(val);
            else if (key == "ctrl.gain") cfg.controller.gain = std::stod(val);
            else if (key == "ctrl.q_coeff") cfg.controller.q_coeff = std::stod(val);
            else if (key == "ctrl.saturation") {
                cfg.controller.saturation = std::stod(val);
                saturation_set = true;
            }
            else if (key == "validate.num_ics") cfg.validate_num_ics = std::stoi(val);
            else if (key == "validate.ic_box") cfg.validate_ic_box = parse_box(parse_doubles(val));
            else if (key == "validate.dt") cfg.validate_dt = std::stod(val);
            else if (key == "validate.horizon") cfg.validate_horizon = std::stod(val);
            else if (key == "validate.radius") cfg.validate_radius = std::stod(val);
            else if (key == "validate.seed") cfg.validate_seed = std::stoull(val);
            else if (key == "validate.min_converged") cfg.validate_min_converged = std::stoi(val);
            else throw FormatError(path, lineno, "unknown key '" + key + "'");
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception&) {
            throw FormatError(path, lineno, "invalid value for '" + key + "'");
        }
    }
    (void)saturation_set;
    validate_config(cfg);
    return cfg;
}

void validate_config(const PipelineConfig& cfg) {
    if (cfg.num_ics < 1) throw ConfigError("data.num_ics must be >= 1");
    if (cfg.delta_t <= 0.0) throw ConfigError("data.delta_t must be positive");
    if (cfg.horizon <= 0.0) throw ConfigError("data.horizon must be positive");
    if (cfg.noise_var < 0.0) throw ConfigError("data.noise_var must be >= 0");
    if (cfg.substeps < 1) throw ConfigError("data.substeps must be >= 1");
    if (cfg.degree < 1) throw ConfigError("dict.degree must be >= 1");
    if (cfg.svd_rtol <= 0.0 || cfg.svd_rtol >= 1.0) throw ConfigError("dict.svd_rtol must be in (0,1)");
    if (cfg.drop_tol < 0.0) throw ConfigError("dict.drop_tol must be >= 0");
    if (cfg.max_modes < 0) throw ConfigError("dict.max_modes must be >= 0");
    if (!(cfg.c_max > cfg.c_min && cfg.c_min > 0.0))
        throw ConfigError("clf bounds must satisfy c_max > c_min > 0");
    for (double g : cfg.gamma_ladder)
        if (g <= 0.0) throw ConfigError("clf.gammas must be positive");
    if (cfg.gamma_ladder.empty()) throw ConfigError("clf.gammas must be nonempty");
    if (cfg.max_iters < 1) throw ConfigError("clf.max_iters must be >= 1");
    if (cfg.check_samples < 1) throw ConfigError("clf.check_samples must be >= 1");
    if (cfg.check_tau <= 0.0) throw ConfigError("clf.check_tau must be positive");
    if (cfg.controller.beta <= 0.0) throw ConfigError("ctrl.beta must be positive");
    if (cfg.controller.gain <= 0.0) throw ConfigError("ctrl.gain must be positive");
    if (cfg.controller.q_coeff <= 0.0) throw ConfigError("ctrl.q_coeff must be positive");
    if (cfg.controller.saturation && *cfg.controller.saturation <= 0.0)
        throw ConfigError("ctrl.saturation must be positive when set");
    if (cfg.validate_num_ics < 1) throw ConfigError("validate.num_ics must be >= 1");
    if (cfg.validate_dt <= 0.0) throw ConfigError("validate.dt must be positive");
    if (cfg.validate_horizon <= 0.0) throw ConfigError("validate.horizon must be positive");
    if (cfg.validate_radius <= 0.0) throw ConfigError("validate.radius must be positive");
}

}  // namespace koopstab
