#include "koopstab/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "koopstab/errors.hpp"

namespace koopstab {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open for writing: " + path);
    return f;
}

// Line reader that tracks position for error reporting.
struct LineReader {
    explicit LineReader(const std::string& path) : path(path), in(path) {
        if (!in) throw Error("cannot open for reading: " + path);
    }
    bool next(std::string& line) {
        if (!std::getline(in, line)) return false;
        ++lineno;
        return true;
    }
    [[noreturn]] void fail(const std::string& what) const { throw FormatError(path, lineno, what); }
    std::string path;
    std::ifstream in;
    int lineno = 0;
};

// "key = v1 v2 ..." lines for the structured formats.
struct KeyValueFile {
    explicit KeyValueFile(const std::string& path) : rd(path) {
        std::string line;
        while (rd.next(line)) {
            if (line.empty() || line[0] == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) rd.fail("expected 'key = value'");
            std::string key = line.substr(0, eq);
            std::string val = line.substr(eq + 1);
            auto trim = [](std::string& s) {
                const auto b = s.find_first_not_of(" \t");
                const auto e = s.find_last_not_of(" \t\r");
                s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
            };
            trim(key);
            trim(val);
            if (key.empty()) rd.fail("empty key");
            entries.emplace_back(key, val);
            lines[key] = rd.lineno;
        }
    }
    const std::string& get(const std::string& key) {
        for (auto& [k, v] : entries)
            if (k == key) return v;
        throw FormatError(rd.path, rd.lineno, "missing key '" + key + "'");
    }
    double get_double(const std::string& key) { return parse_double(key, get(key)); }
    long long get_int(const std::string& key) {
        try {
            return std::stoll(get(key));
        } catch (const std::exception&) {
            throw FormatError(rd.path, lines[key], "invalid integer for '" + key + "'");
        }
    }
    std::vector<double> get_doubles(const std::string& key, std::size_t expected) {
        std::istringstream is(get(key));
        std::vector<double> out;
        double v;
        while (is >> v) out.push_back(v);
        if (out.size() != expected)
            throw FormatError(rd.path, lines[key],
                              "'" + key + "' expected " + std::to_string(expected) + " values, got " +
                                  std::to_string(out.size()));
        return out;
    }
    double parse_double(const std::string& key, const std::string& s) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw FormatError(rd.path, lines[key], "invalid number for '" + key + "'");
        }
    }
    LineReader rd;
    std::vector<std::pair<std::string, std::string>> entries;
    std::map<std::string, int> lines;
};

void write_matrix_rows(std::ofstream& f, const std::string& key, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        f << key << r << " =";
        for (Eigen::Index c = 0; c < m.cols(); ++c) f << ' ' << fmt17(m(r, c));
        f << '\n';
    }
}

Eigen::MatrixXd read_matrix_rows(KeyValueFile& kv, const std::string& key, Eigen::Index rows,
                                 Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto vals = kv.get_doubles(key + std::to_string(r), cols);
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = vals[c];
    }
    return m;
}

}  // namespace

void save_dataset(const TrajectoryDataset& ds, const std::string& path) {
    auto f = open_out(path);
    f << "# system=" << ds.meta.system << '\n';
    f << "# n=" << ds.dim() << '\n';
    f << "# input_mode=" << ds.input_mode << '\n';
    f << "# delta_t=" << fmt17(ds.delta_t) << '\n';
    f << "# noise_var=" << fmt17(ds.meta.noise_var) << '\n';
    f << "# substeps=" << ds.meta.substeps << '\n';
    f << "# horizon=" << fmt17(ds.meta.horizon) << '\n';
    f << "# num_ics=" << ds.meta.num_ics << '\n';
    f << "# seed=" << ds.meta.seed << '\n';
    f << "traj,k,s";
    for (int d = 0; d < ds.dim(); ++d) f << ",x" << d + 1;
    f << '\n';
    // Rows are trajectory snapshots; the final state of each trajectory is the
    // Y of its last pair.
    for (Eigen::Index p = 0; p < ds.pairs(); ++p) {
        auto row = [&](int k, const Eigen::VectorXd& x) {
            f << ds.pair_traj[p] << ',' << k << ',' << ds.input_mode;
            for (Eigen::Index d = 0; d < x.size(); ++d) f << ',' << fmt17(x[d]);
            f << '\n';
        };
        row(ds.pair_step[p], ds.X.col(p));
        const bool last_of_traj =
            p + 1 == ds.pairs() || ds.pair_traj[p + 1] != ds.pair_traj[p];
        if (last_of_traj) row(ds.pair_step[p] + 1, ds.Y.col(p));
    }
}

TrajectoryDataset load_dataset(const std::string& path) {
    LineReader rd(path);
    std::map<std::string, std::string> meta;
    std::string line;
    int n = -1;
    // comment block
    while (rd.next(line)) {
        if (line.empty()) continue;
        if (line[0] != '#') break;
        const auto eq = line.find('=');
        if (eq == std::string::npos) rd.fail("expected '# key=value'");
        std::string key = line.substr(1, eq - 1);
        key.erase(0, key.find_first_not_of(' '));
        key.erase(key.find_last_not_of(' ') + 1);
        meta[key] = line.substr(eq + 1);
    }
    auto need = [&](const std::string& k) {
        auto it = meta.find(k);
        if (it == meta.end()) rd.fail("missing '# " + k + "=...' in header");
        return it->second;
    };
    n = std::stoi(need("n"));
    if (line.rfind("traj,k,s", 0) != 0) rd.fail("expected dataset header row 'traj,k,s,x1,...'");

    std::vector<Trajectory> trajs;
    int prev_traj = -1, prev_k = -1;
    const double delta_t = std::stod(need("delta_t"));
    const int input_mode = std::stoi(need("input_mode"));
    while (rd.next(line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        std::string tok;
        auto next_tok = [&]() {
            if (!std::getline(is, tok, ',')) rd.fail("truncated row");
            return tok;
        };
        const int traj = std::stoi(next_tok());
        const int k = std::stoi(next_tok());
        next_tok();  // s column, echoed from input_mode
        Eigen::VectorXd x(n);
        for (int d = 0; d < n; ++d) {
            try {
                x[d] = std::stod(next_tok());
            } catch (const std::exception&) {
                rd.fail("invalid number in state column " + std::to_string(d + 1));
            }
        }
        if (traj != prev_traj) {
            if (traj != prev_traj + 1) rd.fail("trajectory indices must be consecutive");
            if (k != 0) rd.fail("trajectory must start at k=0");
            trajs.emplace_back();
            trajs.back().delta_t = delta_t;
        } else if (k != prev_k + 1) {
            rd.fail("rows must be sorted by (traj, k) with consecutive k");
        }
        trajs.back().states.push_back(x);
        if (k > 0) trajs.back().inputs.push_back(static_cast<double>(input_mode));
        prev_traj = traj;
        prev_k = k;
    }
    if (trajs.empty()) rd.fail("dataset has no rows");

    DatasetMeta dm;
    dm.system = need("system");
    dm.noise_var = std::stod(need("noise_var"));
    dm.seed = std::stoull(need("seed"));
    dm.num_ics = std::stoi(need("num_ics"));
    dm.substeps = std::stoi(need("substeps"));
    dm.horizon = std::stod(need("horizon"));
    return dataset_from_trajectories(trajs, input_mode, delta_t, dm);
}

void save_model(const BilinearModel& m, const std::string& path) {
    auto f = open_out(path);
    const int N = m.dict.size();
    const int nr = m.n_modes();
    f << "format = koopstab-model-v1\n";
    f << "n = " << m.dict.n << '\n';
    f << "degree = " << m.dict.degree << '\n';
    f << "delta_t = " << fmt17(m.delta_t) << '\n';
    f << "n_terms = " << N << '\n';
    f << "n_modes = " << nr << '\n';
    f << "x_star =";
    for (Eigen::Index i = 0; i < m.x_star.size(); ++i) f << ' ' << fmt17(m.x_star[i]);
    f << '\n';
    f << "exponents =";
    for (const auto& a : m.dict.exponents)
        for (int e : a) f << ' ' << e;
    f << '\n';
    f << "eigenvalues =";
    for (int i = 0; i < nr; ++i) f << ' ' << fmt17(m.eigs[i].real()) << ' ' << fmt17(m.eigs[i].imag());
    f << '\n';
    write_matrix_rows(f, "lambda", m.Lambda);
    write_matrix_rows(f, "b", m.B);
    write_matrix_rows(f, "v_r", m.V_r);
}

BilinearModel load_model(const std::string& path) {
    KeyValueFile kv(path);
    if (kv.get("format") != "koopstab-model-v1")
        throw FormatError(path, 1, "unrecognized model format");
    BilinearModel m;
    const int n = static_cast<int>(kv.get_int("n"));
    const int degree = static_cast<int>(kv.get_int("degree"));
    const int N = static_cast<int>(kv.get_int("n_terms"));
    const int nr = static_cast<int>(kv.get_int("n_modes"));
    m.delta_t = kv.get_double("delta_t");

    m.dict.n = n;
    m.dict.degree = degree;
    const auto exps = kv.get_doubles("exponents", static_cast<std::size_t>(N) * n);
    m.dict.exponents.assign(N, std::vector<int>(n));
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < n; ++i) m.dict.exponents[j][i] = static_cast<int>(exps[j * n + i]);

    const auto xs = kv.get_doubles("x_star", n);
    m.x_star = Eigen::Map<const Eigen::VectorXd>(xs.data(), n);

    const auto ev = kv.get_doubles("eigenvalues", 2 * static_cast<std::size_t>(nr));
    m.eigs.resize(nr);
    for (int i = 0; i < nr; ++i) m.eigs[i] = {ev[2 * i], ev[2 * i + 1]};

    m.Lambda = read_matrix_rows(kv, "lambda", nr, nr);
    m.B = read_matrix_rows(kv, "b", nr, nr);
    m.V_r = read_matrix_rows(kv, "v_r", nr, N);
    m.finalize();
    return m;
}

void save_clf(const QuadraticCLF& clf, const std::string& path) {
    auto f = open_out(path);
    const Eigen::Index nr = clf.P.rows();
    f << "format = koopstab-clf-v1\n";
    f << "n_modes = " << nr << '\n';
    f << "gamma = " << fmt17(clf.gamma) << '\n';
    f << "c_min = " << fmt17(clf.c_min) << '\n';
    f << "c_max = " << fmt17(clf.c_max) << '\n';
    f << "t_star = " << fmt17(clf.t_star) << '\n';
    f << "origin = " << clf.origin << '\n';
    f << "seed = " << clf.seed << '\n';
    f << "iterations = " << clf.trace.iterations << '\n';
    f << "best_objective = "
      << fmt17(clf.trace.best_objective.empty() ? 0.0 : clf.trace.best_objective.back()) << '\n';
    f << "check_passed = " << (clf.check.passed ? 1 : 0) << '\n';
    f << "check_samples = " << clf.check.samples_tested << '\n';
    f << "check_in_region = " << clf.check.samples_in_region << '\n';
    f << "check_worst_margin = " << fmt17(clf.check.worst_margin) << '\n';
    f << "check_tau = " << fmt17(clf.check.tau) << '\n';
    write_matrix_rows(f, "p", clf.P);
}

QuadraticCLF load_clf(const std::string& path) {
    KeyValueFile kv(path);
    if (kv.get("format") != "koopstab-clf-v1")
        throw FormatError(path, 1, "unrecognized CLF format");
    QuadraticCLF clf;
    const int nr = static_cast<int>(kv.get_int("n_modes"));
    clf.gamma = kv.get_double("gamma");
    clf.c_min = kv.get_double("c_min");
    clf.c_max = kv.get_double("c_max");
    clf.t_star = kv.get_double("t_star");
    clf.origin = kv.get("origin");
    clf.seed = static_cast<std::uint64_t>(kv.get_int("seed"));
    clf.trace.iterations = static_cast<int>(kv.get_int("iterations"));
    clf.trace.best_objective = {kv.get_double("best_objective")};
    clf.check.passed = kv.get_int("check_passed") != 0;
    clf.check.samples_tested = static_cast<int>(kv.get_int("check_samples"));
    clf.check.samples_in_region = static_cast<int>(kv.get_int("check_in_region"));
    clf.check.worst_margin = kv.get_double("check_worst_margin");
    clf.check.tau = kv.get_double("check_tau");
    clf.P = read_matrix_rows(kv, "p", nr, nr);
    clf.P = 0.5 * (clf.P + clf.P.transpose()).eval();
    return clf;
}

void save_simulation(const SimulationResult& res, const std::string& path, int ic_index) {
    auto f = open_out(path);
    f << "# ic_index=" << ic_index << '\n';
    f << "# converged=" << (res.converged ? 1 : 0) << '\n';
    f << "# final_distance=" << fmt17(res.final_distance) << '\n';
    f << "t";
    for (Eigen::Index d = 0; d < res.states.rows(); ++d) f << ",x" << d + 1;
    f << ",u,V\n";
    for (Eigen::Index k = 0; k < res.times.size(); ++k) {
        f << fmt17(res.times[k]);
        for (Eigen::Index d = 0; d < res.states.rows(); ++d) f << ',' << fmt17(res.states(d, k));
        f << ',' << fmt17(res.controls[k]) << ',' << fmt17(res.lyapunov[k]) << '\n';
    }
}

void save_simulation_summary(const std::vector<SimulationResult>& runs, const std::string& path) {
    auto f = open_out(path);
    int converged = 0;
    for (const auto& r : runs) converged += r.converged ? 1 : 0;
    f << "# converged_count=" << converged << '\n';
    f << "# total=" << runs.size() << '\n';
    f << "ic_index,converged,final_distance\n";
    for (std::size_t i = 0; i < runs.size(); ++i)
        f << i << ',' << (runs[i].converged ? 1 : 0) << ',' << fmt17(runs[i].final_distance) << '\n';
}

void save_curve(const ErrorCurve& curve, const std::string& path) {
    auto f = open_out(path);
    f << "# trials=" << curve.trials << '\n';
    f << "T,lambda_err,b_err,stderr_lambda,stderr_b\n";
    for (std::size_t i = 0; i < curve.lengths.size(); ++i) {
        f << curve.lengths[i] << ',' << fmt17(curve.lambda_err[i]) << ',' << fmt17(curve.b_err[i])
          << ',' << fmt17(curve.stderr_lambda[i]) << ',' << fmt17(curve.stderr_b[i]);
        if (!curve.flags[i].empty()) f << ",# " << curve.flags[i];
        f << '\n';
    }
    f << "# slope_lambda=" << fmt17(curve.slope_lambda) << " slope_b=" << fmt17(curve.slope_b)
      << '\n';
}

}  // namespace koopstab
