#include "koopstab/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include "koopstab/errors.hpp"
#include "koopstab/parallel.hpp"
#include "koopstab/rng.hpp"

namespace koopstab {

namespace {

struct Block {
    int row;  // starting row in Lambda
    bool is_pair;
    std::complex<double> eig;  // +Im representative for pairs
};

std::vector<Block> blocks_of(const BilinearModel& m) {
    std::vector<Block> out;
    int r = 0;
    const int nr = m.n_modes();
    while (r < nr) {
        if (m.eigs[r].imag() != 0.0) {
            out.push_back({r, true, m.eigs[r]});
            r += 2;
        } else {
            out.push_back({r, false, m.eigs[r]});
            r += 1;
        }
    }
    return out;
}

struct Alignment {
    std::vector<std::pair<int, int>> matched;       // (a-block, b-block)
    std::vector<std::complex<double>> unmatched;    // leftover eigenvalues, either side
    int incompatible = 0;                           // real<->pair matches
    double lambda_err = 0.0;
    double b_err = std::numeric_limits<double>::quiet_NaN();
};

// Greedy nearest-eigenvalue matching of block representatives; the spectral
// errors are evaluated over the matched (and, for B, structurally compatible)
// blocks so that models with a few spurious modes remain comparable.
Alignment align_models(const BilinearModel& a, const BilinearModel& b) {
    const auto ba = blocks_of(a);
    const auto bb = blocks_of(b);
    Alignment al;

    std::vector<bool> used_a(ba.size(), false), used_b(bb.size(), false);
    const std::size_t rounds = std::min(ba.size(), bb.size());
    for (std::size_t r = 0; r < rounds; ++r) {
        double best = std::numeric_limits<double>::max();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < ba.size(); ++i) {
            if (used_a[i]) continue;
            for (std::size_t j = 0; j < bb.size(); ++j) {
                if (used_b[j]) continue;
                const double d = std::abs(ba[i].eig - bb[j].eig);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        used_a[bi] = used_b[bj] = true;
        al.matched.emplace_back(static_cast<int>(bi), static_cast<int>(bj));
        al.lambda_err = std::max(al.lambda_err, best);
        if (ba[bi].is_pair != bb[bj].is_pair) ++al.incompatible;
    }
    for (std::size_t i = 0; i < ba.size(); ++i)
        if (!used_a[i]) al.unmatched.push_back(ba[i].eig);
    for (std::size_t j = 0; j < bb.size(); ++j)
        if (!used_b[j]) al.unmatched.push_back(bb[j].eig);

    // B error on the matched, structure-compatible sub-blocks, reordered to
    // a's canonical row order.
    std::vector<int> rows_a, rows_b;
    for (const auto& [i, j] : al.matched) {
        if (ba[i].is_pair != bb[j].is_pair) continue;
        rows_a.push_back(ba[i].row);
        rows_b.push_back(bb[j].row);
        if (ba[i].is_pair) {
            rows_a.push_back(ba[i].row + 1);
            rows_b.push_back(bb[j].row + 1);
        }
    }
    if (!rows_a.empty()) {
        const int m = static_cast<int>(rows_a.size());
        Eigen::MatrixXd da(m, m);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < m; ++c)
                da(r, c) = a.B(rows_a[r], rows_a[c]) - b.B(rows_b[r], rows_b[c]);
        al.b_err = da.jacobiSvd().singularValues()[0];
    }
    return al;
}

std::string list_eigs(const std::vector<std::complex<double>>& eigs) {
    std::ostringstream os;
    for (const auto& e : eigs)
        os << " (" << e.real() << (e.imag() >= 0 ? "+" : "") << e.imag() << "i)";
    return os.str();
}

}  // namespace

std::pair<double, double> model_error(const BilinearModel& a, const BilinearModel& b) {
    if (a.dict.n != b.dict.n || a.dict.degree != b.dict.degree)
        throw AlignmentError("model_error: dictionaries differ");
    const Alignment al = align_models(a, b);
    if (!al.unmatched.empty())
        throw AlignmentError("model_error: retained mode counts differ (" +
                             std::to_string(a.n_modes()) + " vs " + std::to_string(b.n_modes()) +
                             "); unmatched eigenvalues:" + list_eigs(al.unmatched));
    if (al.incompatible > 0)
        throw AlignmentError("model_error: " + std::to_string(al.incompatible) +
                             " aligned mode(s) have incompatible real/pair structure");
    return {al.lambda_err, al.b_err};
}

ErrorCurve sample_complexity_sweep(const ControlAffineSystem& sys, const Dictionary& dict,
                                   const SweepOptions& opts) {
    SweepOptions o = opts;
    if (o.lengths.empty())
        for (int t = 6; t <= 30; ++t) o.lengths.push_back(t);
    for (int t : o.lengths)
        if (t > o.ref_length)
            throw Error("sample_complexity_sweep: ref_length must cover every tested length");
    if (!std::is_sorted(o.lengths.begin(), o.lengths.end()))
        throw Error("sample_complexity_sweep: lengths must be increasing");

    const std::size_t nl = o.lengths.size();
    const int trials = o.trials;
    Eigen::MatrixXd lam(nl, trials), berr(nl, trials);
    lam.setConstant(std::numeric_limits<double>::quiet_NaN());
    berr.setConstant(std::numeric_limits<double>::quiet_NaN());
    std::vector<std::vector<std::string>> notes(nl);
    std::vector<std::vector<int>> partial(nl);  // trials compared on a mode subset

    std::vector<std::string> trial_notes(trials);
    parallel_for(static_cast<std::size_t>(trials), [&](std::size_t trial) {
        const std::uint64_t tseed = splitmix64(o.seed ^ splitmix64(trial + 101));
        // One pool of trajectories per trial; every tested length truncates the
        // same time series, so T == ref_length reproduces the reference exactly.
        std::vector<Trajectory> t0(o.num_ics), t1(o.num_ics);
        for (int i = 0; i < o.num_ics; ++i) {
            Rng ic = Rng::stream(tseed, i);
            Eigen::VectorXd x0(sys.n);
            for (int d = 0; d < sys.n; ++d) x0[d] = ic.uniform(o.ic_box[d].first, o.ic_box[d].second);
            const double horizon = o.ref_length * o.delta_t;
            t0[i] = integrate_sde(sys, x0, 0, o.noise_var, o.delta_t, horizon, o.substeps,
                                  splitmix64(tseed ^ splitmix64(1000 + i)));
            t1[i] = integrate_sde(sys, x0, 1, o.noise_var, o.delta_t, horizon, o.substeps,
                                  splitmix64(tseed ^ splitmix64(2000 + i)));
        }
        DatasetMeta meta;
        meta.system = sys.name;
        meta.noise_var = o.noise_var;
        meta.seed = tseed;
        meta.num_ics = o.num_ics;
        meta.substeps = o.substeps;

        auto truncate = [&](const std::vector<Trajectory>& trajs, int steps, int s) {
            std::vector<Trajectory> cut(trajs.size());
            for (std::size_t i = 0; i < trajs.size(); ++i) {
                cut[i] = trajs[i];
                cut[i].states.resize(steps + 1);
                cut[i].inputs.resize(steps);
            }
            DatasetMeta m2 = meta;
            m2.horizon = steps * o.delta_t;
            return dataset_from_trajectories(cut, s, o.delta_t, m2);
        };

        BilinearModel ref;
        try {
            ref = fit_bilinear_model(truncate(t0, o.ref_length, 0), truncate(t1, o.ref_length, 1),
                                     dict, sys.equilibrium, o.fit);
        } catch (const Error& e) {
            trial_notes[trial] = std::string("reference fit failed: ") + e.what();
            return;
        }
        for (std::size_t li = 0; li < nl; ++li) {
            const int T = o.lengths[li];
            try {
                const BilinearModel mt = fit_bilinear_model(truncate(t0, T, 0), truncate(t1, T, 1),
                                                            dict, sys.equilibrium, o.fit);
                const Alignment al = align_models(ref, mt);
                lam(li, trial) = al.lambda_err;
                berr(li, trial) = al.b_err;
                if (!al.unmatched.empty() || al.incompatible > 0)
                    partial[li].push_back(static_cast<int>(trial));
            } catch (const Error& e) {
                notes[li].push_back("trial " + std::to_string(trial) + ": " + e.what());
            }
        }
    });
    for (const auto& tn : trial_notes)
        if (!tn.empty()) throw IdentificationError("sample_complexity_sweep: " + tn);

    ErrorCurve curve;
    curve.lengths = o.lengths;
    curve.trials = trials;
    curve.lambda_err.resize(nl);
    curve.b_err.resize(nl);
    curve.stderr_lambda.resize(nl);
    curve.stderr_b.resize(nl);
    curve.flags.resize(nl);

    auto stats = [&](const Eigen::MatrixXd& m, std::size_t li, double& mean, double& se) {
        std::vector<double> vals;
        for (int t = 0; t < trials; ++t)
            if (std::isfinite(m(li, t))) vals.push_back(m(li, t));
        if (vals.empty()) {
            mean = std::numeric_limits<double>::quiet_NaN();
            se = mean;
            return;
        }
        mean = 0.0;
        for (double v : vals) mean += v;
        mean /= vals.size();
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        se = vals.size() > 1 ? std::sqrt(var / (vals.size() - 1) / vals.size()) : 0.0;
    };
    for (std::size_t li = 0; li < nl; ++li) {
        stats(lam, li, curve.lambda_err[li], curve.stderr_lambda[li]);
        stats(berr, li, curve.b_err[li], curve.stderr_b[li]);
        std::ostringstream os;
        if (!partial[li].empty())
            os << partial[li].size() << " trial(s) aligned on a mode subset;";
        if (!notes[li].empty()) os << " " << notes[li].size() << " trial(s) failed: " << notes[li].front();
        curve.flags[li] = os.str();
    }

    // Log-log OLS slope over lengths with valid positive means.
    auto slope = [&](const Eigen::VectorXd& y) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int m = 0;
        for (std::size_t li = 0; li < nl; ++li) {
            if (!std::isfinite(y[li]) || y[li] <= 0.0) continue;
            const double xl = std::log(static_cast<double>(o.lengths[li]));
            const double yl = std::log(y[li]);
            sx += xl;
            sy += yl;
            sxx += xl * xl;
            sxy += xl * yl;
            ++m;
        }
        if (m < 2) return std::numeric_limits<double>::quiet_NaN();
        return (m * sxy - sx * sy) / (m * sxx - sx * sx);
    };
    curve.slope_lambda = slope(curve.lambda_err);
    curve.slope_b = slope(curve.b_err);
    return curve;
}

}  // namespace koopstab
