#include "koopstab/koopman.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "koopstab/errors.hpp"
#include "koopstab/parallel.hpp"

namespace koopstab {

namespace {

constexpr double kNullModulus = 1e-12;

// Truncated-SVD pseudoinverse applied to the right-hand side: X = A^+ B.
Eigen::MatrixXd pinv_solve(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double rtol,
                           EdmdDiagnostics* diag = nullptr) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv[0] : 0.0;
    const double cut = rtol * smax;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > cut) ++rank;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    for (int i = 0; i < rank; ++i) inv[i] = 1.0 / sv[i];
    if (diag) {
        diag->rank = rank;
        diag->truncated = static_cast<int>(sv.size()) - rank;
        diag->sigma_max = smax;
        diag->sigma_min_kept = rank > 0 ? sv[rank - 1] : 0.0;
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * B;
}

Eigen::MatrixXd pinv(const Eigen::MatrixXd& A, double rtol, int* rank_out = nullptr) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cut = (sv.size() > 0 ? sv[0] : 0.0) * rtol;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > cut) {
            inv[i] = 1.0 / sv[i];
            ++rank;
        }
    if (rank_out) *rank_out = rank;
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

struct GramPair {
    Eigen::MatrixXd G, A;
};

}  // namespace

KoopmanApprox edmd_fit(const TrajectoryDataset& dataset, const Dictionary& dict, double svd_rtol) {
    if (dataset.pairs() == 0) throw IdentificationError("edmd_fit: empty dataset");
    if (dataset.dim() != dict.n)
        throw IdentificationError("edmd_fit: dictionary dimension does not match dataset");
    if (svd_rtol <= 0.0 || svd_rtol >= 1.0)
        throw IdentificationError("edmd_fit: svd_rtol must lie in (0, 1)");

    const Eigen::Index M = dataset.pairs();
    const int N = dict.size();
    const Eigen::Index chunk = 8192;
    const std::size_t nchunks = static_cast<std::size_t>((M + chunk - 1) / chunk);

    // Gram/cross accumulation as a fixed-tree reduction over snapshot chunks.
    auto map_chunk = [&](std::size_t c) {
        const Eigen::Index lo = static_cast<Eigen::Index>(c) * chunk;
        const Eigen::Index len = std::min(chunk, M - lo);
        Eigen::MatrixXd Px(N, len), Py(N, len);
        Eigen::VectorXd buf;
        for (Eigen::Index m = 0; m < len; ++m) {
            dict.evaluate_into(dataset.X.col(lo + m), buf);
            Px.col(m) = buf;
            dict.evaluate_into(dataset.Y.col(lo + m), buf);
            Py.col(m) = buf;
        }
        GramPair gp;
        gp.G = Px * Px.transpose();
        gp.A = Px * Py.transpose();
        return gp;
    };
    auto reduce = [](GramPair a, GramPair b) {
        a.G += b.G;
        a.A += b.A;
        return a;
    };
    GramPair acc = tree_mapreduce<GramPair>(0, nchunks, map_chunk, reduce);

    KoopmanApprox out;
    out.G = acc.G / static_cast<double>(M);
    out.A = acc.A / static_cast<double>(M);
    out.input_mode = dataset.input_mode;
    out.delta_t = dataset.delta_t;
    out.svd_rtol = svd_rtol;
    out.diag.m_lt_n = M < N;
    out.U = pinv_solve(out.G, out.A, svd_rtol, &out.diag);
    return out;
}

Spectrum spectrum(const KoopmanApprox& approx, double defect_cond_threshold) {
    const Eigen::Index N = approx.U.rows();
    Eigen::EigenSolver<Eigen::MatrixXd> es(approx.U);
    if (es.info() != Eigen::Success) throw IdentificationError("spectrum: eigensolver failed");

    Eigen::VectorXcd vals = es.eigenvalues();
    Eigen::MatrixXcd vecs = es.eigenvectors();

    // Defectiveness check via the eigenvector-basis condition number.
    {
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(vecs);
        const auto& sv = svd.singularValues();
        const double cond = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1]
                                                    : std::numeric_limits<double>::infinity();
        if (cond > defect_cond_threshold)
            throw DefectiveOperatorError(
                "spectrum: eigenvector basis condition number " + std::to_string(cond) +
                " exceeds threshold " + std::to_string(defect_cond_threshold));
    }

    // Collect mode units: reals and conjugate pairs (keep only the +Im member;
    // its partner is reconstructed by conjugation).
    struct Unit {
        std::complex<double> lambda;
        Eigen::VectorXcd v;
        bool is_pair;
    };
    std::vector<Unit> units;
    std::vector<bool> used(N, false);
    for (Eigen::Index i = 0; i < N; ++i) {
        if (used[i]) continue;
        const std::complex<double> li = vals[i];
        if (li.imag() == 0.0) {
            units.push_back({li, vecs.col(i), false});
            used[i] = true;
            continue;
        }
        Eigen::Index partner = -1;
        double best = std::numeric_limits<double>::max();
        for (Eigen::Index j = i + 1; j < N; ++j) {
            if (used[j]) continue;
            const double d = std::abs(vals[j] - std::conj(li));
            if (d < best) {
                best = d;
                partner = j;
            }
        }
        if (partner < 0 || best > 1e-8 * (1.0 + std::abs(li)))
            throw PairingError("spectrum: unpaired complex eigenvalue");
        used[i] = used[partner] = true;
        Unit u{li, vecs.col(i), true};
        if (u.lambda.imag() < 0.0) {
            u.lambda = std::conj(u.lambda);
            u.v = u.v.conjugate();
        }
        units.push_back(std::move(u));
    }

    const double dt = approx.delta_t;
    auto cont = [dt](std::complex<double> l) { return std::log(l) / dt; };

    // Canonical order: |log(lambda)/dt| ascending (null modes last), angle and
    // real part as deterministic tie-breaks.
    auto sort_key = [&](const Unit& u) {
        const double mod = std::abs(u.lambda);
        if (mod <= kNullModulus) return std::make_tuple(std::numeric_limits<double>::infinity(), 0.0, 0.0);
        const std::complex<double> lh = cont(u.lambda);
        return std::make_tuple(std::abs(lh), std::arg(lh), lh.real());
    };
    std::stable_sort(units.begin(), units.end(),
                     [&](const Unit& a, const Unit& b) { return sort_key(a) < sort_key(b); });

    Spectrum spec;
    spec.delta_t = dt;
    spec.eigenvalues.resize(N);
    spec.eigenvectors.resize(N, N);
    spec.cont_eigenvalues = Eigen::VectorXcd::Zero(N);
    spec.kind.resize(N);
    spec.usable.assign(N, true);

    Eigen::Index col = 0;
    for (auto& u : units) {
        // Phase fix: largest-magnitude entry real positive.
        Eigen::Index imax = 0;
        double amax = -1.0;
        for (Eigen::Index r = 0; r < u.v.size(); ++r)
            if (std::abs(u.v[r]) > amax) {
                amax = std::abs(u.v[r]);
                imax = r;
            }
        if (amax > 0.0) u.v *= std::conj(u.v[imax]) / std::abs(u.v[imax]);
        u.v /= u.v.norm();

        const double mod = std::abs(u.lambda);
        const bool null_mode = mod <= kNullModulus;
        // Negative real axis: the principal-branch log is ambiguous and the
        // mode has a real eigenvector, so no real block can carry it.
        const bool branch_invalid = !null_mode && !u.is_pair && u.lambda.real() < 0.0;
        const bool ok = !null_mode && !branch_invalid;

        if (u.is_pair) {
            spec.eigenvalues[col] = u.lambda;
            spec.eigenvalues[col + 1] = std::conj(u.lambda);
            spec.eigenvectors.col(col) = u.v;
            spec.eigenvectors.col(col + 1) = u.v.conjugate();
            spec.kind[col] = ModeKind::PairFirst;
            spec.kind[col + 1] = ModeKind::PairSecond;
            spec.usable[col] = spec.usable[col + 1] = ok;
            if (ok) {
                spec.cont_eigenvalues[col] = cont(u.lambda);
                spec.cont_eigenvalues[col + 1] = std::conj(spec.cont_eigenvalues[col]);
            }
            col += 2;
        } else {
            spec.eigenvalues[col] = u.lambda;
            spec.eigenvectors.col(col) = u.v;
            spec.kind[col] = ModeKind::Real;
            spec.usable[col] = ok;
            if (ok) spec.cont_eigenvalues[col] = cont(u.lambda);
            col += 1;
        }
        if (null_mode) spec.n_null += u.is_pair ? 2 : 1;
        if (branch_invalid) spec.n_branch += 1;
    }
    // A few stray negative-real eigenvalues are short-data artifacts and are
    // simply excluded; a large fraction means the dynamics are undersampled.
    if (spec.n_branch * 4 >= N)
        throw SamplingTooCoarseError(
            "spectrum: " + std::to_string(spec.n_branch) + " of " + std::to_string(N) +
            " eigenvalues lie on the negative real axis; sampling interval too coarse for the "
            "principal-branch log");
    return spec;
}

RealifiedBasis realify(const Spectrum& spec, double drop_tol, int max_modes) {
    const Eigen::Index N = spec.eigenvalues.size();
    std::vector<int> keep;
    int rows = 0;
    for (Eigen::Index i = 0; i < N; ++i) {
        if (spec.kind[i] == ModeKind::PairSecond) continue;
        if (!spec.usable[i]) continue;  // pseudoinverse null space carries no dynamics
        const std::complex<double> lh = spec.cont_eigenvalues[i];
        if (std::abs(lh) < drop_tol) {
            // Trivial-mode filter: near-zero continuous eigenvalue whose
            // eigenvector is the constant function e1. The direction test is
            // loose enough to absorb the Gram conditioning of raw monomials.
            Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(spec.eigenvectors.rows());
            e1[0] = 1.0;
            if ((spec.eigenvectors.col(i) - e1).norm() <= 1e-3) continue;
        }
        const int width = spec.kind[i] == ModeKind::PairFirst ? 2 : 1;
        if (max_modes > 0 && rows + width > max_modes) continue;  // modes are sorted slow-first
        rows += width;
        keep.push_back(static_cast<int>(i));
    }

    int nr = 0;
    for (int i : keep) nr += spec.kind[i] == ModeKind::PairFirst ? 2 : 1;

    RealifiedBasis rb;
    rb.Lambda = Eigen::MatrixXd::Zero(nr, nr);
    rb.V_r = Eigen::MatrixXd::Zero(nr, spec.eigenvectors.rows());
    rb.row_eigs.resize(nr);
    rb.retained = keep;

    int r = 0;
    for (int i : keep) {
        const std::complex<double> lh = spec.cont_eigenvalues[i];
        const Eigen::VectorXcd v = spec.eigenvectors.col(i);
        if (spec.kind[i] == ModeKind::Real) {
            rb.Lambda(r, r) = lh.real();
            rb.V_r.row(r) = v.real().transpose();
            rb.row_eigs[r] = lh;
            r += 1;
        } else {
            const double a = lh.real(), b = lh.imag();
            rb.Lambda(r, r) = a;
            rb.Lambda(r, r + 1) = b;
            rb.Lambda(r + 1, r) = -b;
            rb.Lambda(r + 1, r + 1) = a;
            rb.V_r.row(r) = 2.0 * v.real().transpose();
            rb.V_r.row(r + 1) = -2.0 * v.imag().transpose();
            rb.row_eigs[r] = lh;
            rb.row_eigs[r + 1] = std::conj(lh);
            r += 2;
        }
    }
    return rb;
}

Eigen::MatrixXd control_matrix(const KoopmanApprox& u0, const KoopmanApprox& u1,
                               const RealifiedBasis& basis, BMethod method, double svd_rtol) {
    if (u0.U.rows() != u1.U.rows())
        throw IdentificationError("control_matrix: operator size mismatch");
    if (u0.delta_t != u1.delta_t)
        throw IdentificationError("control_matrix: sampling intervals differ");
    const double dt = u0.delta_t;
    const Eigen::Index nr = basis.V_r.rows();

    if (method == BMethod::Similarity) {
        // Evaluations advance by U^T, so the generator difference acts on
        // Psi(x) through Bbar^T; project onto the retained eigenfunctions.
        const Eigen::MatrixXd Bbar = (u1.U - u0.U) / dt;
        int rank = 0;
        const Eigen::MatrixXd Vr_pinv = pinv(basis.V_r, svd_rtol, &rank);
        if (rank < nr)
            throw IllConditionedEigenbasisError(
                "control_matrix: realified eigenbasis is rank-deficient (rank " +
                std::to_string(rank) + " < " + std::to_string(nr) + ")");
        return basis.V_r * Bbar.transpose() * Vr_pinv;
    }

    // Refit: repeat EDMD with the lifted observables z = V_r Psi as the
    // dictionary. Since z is linear in Psi, the lifted Gram/cross matrices
    // are conjugations of the stored ones; no second data pass is needed.
    auto lifted_gram = [&](const KoopmanApprox& ka) {
        Eigen::MatrixXd Gz = basis.V_r * ka.G * basis.V_r.transpose();
        Eigen::MatrixXd Az = basis.V_r * ka.A * basis.V_r.transpose();
        return std::make_pair(Gz, Az);
    };
    auto [G0, A0] = lifted_gram(u0);
    auto [G1, A1] = lifted_gram(u1);
    const Eigen::MatrixXd Ubar0 = pinv_solve(G0, A0, svd_rtol);
    const Eigen::MatrixXd Ubar1 = pinv_solve(G1, A1, svd_rtol);
    return ((Ubar1 - Ubar0) / dt).transpose();
}

void BilinearModel::finalize() {
    lift_offset = V_r.col(0);  // Psi(0) = e1 for a monomial dictionary
}

BilinearModel assemble_model(const RealifiedBasis& basis, const Eigen::MatrixXd& B,
                             const Dictionary& dict, const Eigen::VectorXd& x_star, double delta_t) {
    BilinearModel m;
    m.Lambda = basis.Lambda;
    m.B = B;
    m.V_r = basis.V_r;
    m.eigs = basis.row_eigs;
    m.dict = dict;
    m.x_star = x_star;
    m.delta_t = delta_t;
    m.finalize();
    return m;
}

Eigen::VectorXd lift(const BilinearModel& model, const Eigen::VectorXd& x) {
    Eigen::VectorXd psi, z;
    lift_into(model, x, psi, z);
    return z;
}

void lift_into(const BilinearModel& model, const Eigen::VectorXd& x, Eigen::VectorXd& psi_buf,
               Eigen::VectorXd& z_out) {
    model.dict.evaluate_into(x - model.x_star, psi_buf);
    z_out.noalias() = model.V_r * psi_buf;
    z_out -= model.lift_offset;
}

LiftedTrajectory predict(const BilinearModel& model, const Eigen::VectorXd& z0,
                         const std::function<double(double)>& u_signal, double dt, double horizon,
                         double blow_up) {
    if (dt <= 0.0) throw Error("predict: dt must be positive");
    const int samples = static_cast<int>(std::round(horizon / dt));
    LiftedTrajectory out;
    out.times.resize(samples + 1);
    out.Z.resize(z0.size(), samples + 1);
    out.u.resize(samples + 1);
    auto rhs = [&](double t, const Eigen::VectorXd& z) -> Eigen::VectorXd {
        return model.Lambda * z + u_signal(t) * (model.B * z);
    };
    Eigen::VectorXd z = z0;
    out.times[0] = 0.0;
    out.Z.col(0) = z;
    out.u[0] = u_signal(0.0);
    for (int k = 0; k < samples; ++k) {
        const double t = k * dt;
        const Eigen::VectorXd k1 = rhs(t, z);
        const Eigen::VectorXd k2 = rhs(t + 0.5 * dt, z + 0.5 * dt * k1);
        const Eigen::VectorXd k3 = rhs(t + 0.5 * dt, z + 0.5 * dt * k2);
        const Eigen::VectorXd k4 = rhs(t + dt, z + dt * k3);
        z += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!z.allFinite() || z.norm() > blow_up)
            throw DivergenceError((k + 1) * dt, "predict: lifted state diverged");
        out.times[k + 1] = (k + 1) * dt;
        out.Z.col(k + 1) = z;
        out.u[k + 1] = u_signal((k + 1) * dt);
    }
    return out;
}

BilinearModel fit_bilinear_model(const TrajectoryDataset& data0, const TrajectoryDataset& data1,
                                 const Dictionary& dict, const Eigen::VectorXd& x_star,
                                 const FitOptions& opts) {
    const TrajectoryDataset d0 = data0.shifted(x_star);
    const TrajectoryDataset d1 = data1.shifted(x_star);
    const KoopmanApprox u0 = edmd_fit(d0, dict, opts.svd_rtol);
    const KoopmanApprox u1 = edmd_fit(d1, dict, opts.svd_rtol);
    const Spectrum spec = spectrum(u0, opts.defect_cond_threshold);
    const RealifiedBasis basis = realify(spec, opts.drop_tol, opts.max_modes);
    const Eigen::MatrixXd B = control_matrix(u0, u1, basis, opts.method, opts.svd_rtol);
    return assemble_model(basis, B, dict, x_star, data0.delta_t);
}

}  // namespace koopstab
