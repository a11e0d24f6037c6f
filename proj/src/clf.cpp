#include "koopstab/clf.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "koopstab/errors.hpp"
#include "koopstab/rng.hpp"

namespace koopstab {

Eigen::MatrixXd project_spectral_band(const Eigen::MatrixXd& sym, double c_min, double c_max) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sym + sym.transpose()));
    Eigen::VectorXd d = es.eigenvalues();
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = std::clamp(d[i], c_min, c_max);
    Eigen::MatrixXd p = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (p + p.transpose());
}

namespace {

double lambda_max_sym(const Eigen::MatrixXd& s, Eigen::VectorXd* top_vec = nullptr) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    const Eigen::Index last = s.rows() - 1;
    if (top_vec) *top_vec = es.eigenvectors().col(last);
    return es.eigenvalues()[last];
}

}  // namespace

QuadraticCLF solve_clf(const Eigen::MatrixXd& Lambda, const Eigen::MatrixXd& B, double gamma,
                       double c_min, double c_max, int max_iters, std::uint64_t seed) {
    if (!(c_max > c_min && c_min > 0.0)) throw Error("solve_clf: need c_max > c_min > 0");
    if (gamma <= 0.0) throw Error("solve_clf: gamma must be positive");
    if (!Lambda.allFinite() || !B.allFinite()) throw Error("solve_clf: non-finite input matrix");
    const Eigen::Index n = Lambda.rows();

    const Eigen::MatrixXd Bsym = 0.5 * (B + B.transpose());
    auto objective = [&](const Eigen::MatrixXd& P, Eigen::VectorXd* v = nullptr) {
        const Eigen::MatrixXd S = P * Lambda + Lambda.transpose() * P;
        return lambda_max_sym(0.5 * (S + S.transpose()), v) - gamma * (P * B).trace();
    };

    Eigen::MatrixXd P = project_spectral_band(
        0.5 * (c_min + c_max) * Eigen::MatrixXd::Identity(n, n), c_min, c_max);
    Eigen::MatrixXd best_P = P;
    Eigen::VectorXd v;
    double best_f = objective(P, &v);

    QuadraticCLF out;
    out.gamma = gamma;
    out.c_min = c_min;
    out.c_max = c_max;
    out.seed = seed;
    out.trace.best_objective.reserve(max_iters);
    out.trace.best_objective.push_back(best_f);

    const double s0 = c_max - c_min;
    for (int k = 1; k <= max_iters; ++k) {
        // subgradient: sym(2 v (Lambda v)') - gamma sym(B)
        const Eigen::VectorXd lv = Lambda * v;
        Eigen::MatrixXd g = v * lv.transpose();
        g += g.transpose().eval();
        g -= gamma * Bsym;
        const double gn = g.norm();
        if (gn < 1e-15) break;
        P = project_spectral_band(P - (s0 / std::sqrt(static_cast<double>(k))) * (g / gn),
                                  c_min, c_max);
        const double f = objective(P, &v);
        if (f < best_f) {
            best_f = f;
            best_P = P;
        }
        out.trace.best_objective.push_back(best_f);
    }
    out.trace.iterations = static_cast<int>(out.trace.best_objective.size()) - 1;
    out.P = 0.5 * (best_P + best_P.transpose());
    const Eigen::MatrixXd S = out.P * Lambda + Lambda.transpose() * out.P;
    out.t_star = lambda_max_sym(0.5 * (S + S.transpose()));
    return out;
}

std::pair<double, double> clf_terms(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Lambda,
                                    const Eigen::MatrixXd& B, const Eigen::VectorXd& z) {
    const Eigen::VectorXd psz = P * z + P.transpose() * z;
    const double a = psz.dot(Lambda * z);
    const double b = psz.dot(B * z);
    return {a, b};
}

StabilizabilityReport check_stabilizability(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Lambda,
                                            const Eigen::MatrixXd& B, int n_samples, double tau,
                                            std::uint64_t seed) {
    const Eigen::Index n = P.rows();
    const Eigen::MatrixXd QA = P * Lambda + Lambda.transpose() * P;
    const Eigen::MatrixXd QB = P * B + B.transpose() * P;

    StabilizabilityReport rep;
    rep.tau = tau;
    rep.samples_tested = n_samples;
    rep.worst_margin = std::numeric_limits<double>::infinity();

    Rng rng(seed);
    struct Candidate {
        double margin;
        Eigen::VectorXd z;
    };
    std::vector<Candidate> worst;
    for (int i = 0; i < n_samples; ++i) {
        const Eigen::VectorXd z = rng.on_sphere(n);
        const double a = z.dot(QA * z);
        if (a < 0.0) continue;
        ++rep.samples_in_region;
        const double m = std::abs(z.dot(QB * z));
        if (m < rep.worst_margin) {
            rep.worst_margin = m;
            rep.witness = z;
        }
        worst.push_back({m, z});
        std::push_heap(worst.begin(), worst.end(),
                       [](const Candidate& a_, const Candidate& b_) { return a_.margin > b_.margin; });
        if (worst.size() > 10) {
            std::pop_heap(worst.begin(), worst.end(),
                          [](const Candidate& a_, const Candidate& b_) { return a_.margin > b_.margin; });
            worst.pop_back();
        }
    }

    // Local refinement: push the worst samples further down |z' QB z| while
    // staying on the sphere inside {z' QA z >= 0}.
    for (auto& cand : worst) {
        Eigen::VectorXd z = cand.z;
        double m = std::abs(z.dot(QB * z));
        double step = 0.1;
        for (int it = 0; it < 200 && step > 1e-12; ++it) {
            const double b = z.dot(QB * z);
            Eigen::VectorXd g = 2.0 * (b >= 0.0 ? 1.0 : -1.0) * (QB * z);
            g -= g.dot(z) * z;  // tangent projection
            const double gn = g.norm();
            if (gn < 1e-14) break;
            Eigen::VectorXd zn = (z - step * g / gn).normalized();
            if (zn.dot(QA * zn) >= 0.0 && std::abs(zn.dot(QB * zn)) < m) {
                z = zn;
                m = std::abs(z.dot(QB * z));
            } else {
                step *= 0.5;
            }
        }
        if (m < rep.worst_margin) {
            rep.worst_margin = m;
            rep.witness = z;
        }
    }

    rep.passed = rep.samples_in_region == 0 || rep.worst_margin > tau;
    if (rep.samples_in_region == 0) rep.worst_margin = std::numeric_limits<double>::infinity();
    return rep;
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q) {
    const Eigen::Index n = A.rows();
    Eigen::ComplexSchur<Eigen::MatrixXd> schur(A);
    if (schur.info() != Eigen::Success) throw Error("solve_lyapunov: Schur decomposition failed");
    const Eigen::MatrixXcd T = schur.matrixT();
    const Eigen::MatrixXcd U = schur.matrixU();
    for (Eigen::Index i = 0; i < n; ++i)
        if (T(i, i).real() >= 0.0) throw Error("solve_lyapunov: matrix is not Hurwitz");

    // A = U T U*; with P = U Y U* the equation becomes T* Y + Y T = C.
    const Eigen::MatrixXcd C = -U.adjoint() * Q * U;
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::VectorXcd rhs = C.col(j);
        for (Eigen::Index k = 0; k < j; ++k) rhs -= T(k, j) * Y.col(k);
        // (T* + T(j,j) I) is lower triangular: forward substitution.
        for (Eigen::Index r = 0; r < n; ++r) {
            std::complex<double> acc = rhs[r];
            for (Eigen::Index k = 0; k < r; ++k) acc -= std::conj(T(k, r)) * Y(k, j);
            Y(r, j) = acc / (std::conj(T(r, r)) + T(j, j));
        }
    }
    const Eigen::MatrixXcd P = U * Y * U.adjoint();
    return 0.5 * (P.real() + P.real().transpose());
}

std::optional<Eigen::MatrixXd> lyapunov_clf_candidate(const Eigen::MatrixXd& Lambda,
                                                      const Eigen::MatrixXd& B, double s,
                                                      double c_min, double c_max) {
    const Eigen::MatrixXd A = Lambda + s * B;
    const Eigen::VectorXcd ev = A.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i].real() >= -1e-9) return std::nullopt;
    const Eigen::MatrixXd P =
        solve_lyapunov(A, Eigen::MatrixXd::Identity(A.rows(), A.cols()));
    // Rescale into the band before clipping so the shape survives when the
    // Lyapunov solution's spectrum does not straddle [c_min, c_max].
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
    const double pmin = es.eigenvalues().minCoeff(), pmax = es.eigenvalues().maxCoeff();
    if (pmin <= 0.0) return std::nullopt;
    const double scale = std::sqrt((c_min * c_max) / (pmin * pmax));
    return project_spectral_band(scale * P, c_min, c_max);
}

QuadraticCLF design_clf(const Eigen::MatrixXd& Lambda, const Eigen::MatrixXd& B,
                        const ClfDesignOptions& opts, std::string* log) {
    auto note = [&](const std::string& line) {
        if (log) *log += line + "\n";
    };
    QuadraticCLF last;
    for (double gamma : opts.gammas) {
        QuadraticCLF clf = solve_clf(Lambda, B, gamma, opts.c_min, opts.c_max, opts.max_iters,
                                     opts.seed);
        clf.check = check_stabilizability(clf.P, Lambda, B, opts.check_samples, opts.check_tau,
                                          opts.seed);
        note("gamma=" + std::to_string(gamma) + ": t_star=" + std::to_string(clf.t_star) +
             " check=" + (clf.check.passed ? "pass" : "fail") +
             " margin=" + std::to_string(clf.check.worst_margin));
        if (clf.check.passed) return clf;
        last = std::move(clf);
    }
    for (double s : opts.init_s) {
        const auto cand = lyapunov_clf_candidate(Lambda, B, s, opts.c_min, opts.c_max);
        if (!cand) {
            note("lyapunov s=" + std::to_string(s) + ": Lambda + sB not Hurwitz");
            continue;
        }
        QuadraticCLF clf;
        clf.P = *cand;
        clf.gamma = opts.gammas.front();
        clf.c_min = opts.c_min;
        clf.c_max = opts.c_max;
        clf.seed = opts.seed;
        clf.origin = "lyapunov(s=" + std::to_string(s) + ")";
        const Eigen::MatrixXd S = clf.P * Lambda + Lambda.transpose() * clf.P;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
        clf.t_star = es.eigenvalues().maxCoeff();
        clf.trace.best_objective = {clf.t_star - clf.gamma * (clf.P * B).trace()};
        clf.trace.iterations = 0;
        clf.check = check_stabilizability(clf.P, Lambda, B, opts.check_samples, opts.check_tau,
                                          opts.seed);
        note("lyapunov s=" + std::to_string(s) + ": t_star=" + std::to_string(clf.t_star) +
             " check=" + (clf.check.passed ? "pass" : "fail") +
             " margin=" + std::to_string(clf.check.worst_margin));
        if (clf.check.passed) return clf;
        last = std::move(clf);
    }
    return last;
}

}  // namespace koopstab
