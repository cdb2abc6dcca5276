#include "ggps/schur.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "ggps/errors.hpp"
#include "ggps/solve.hpp"

namespace ggps {

namespace {

// Block fill between the stacked-row expansions of two point index lists.
// One exponential per point pair covers all (1+G)^2 derivative blocks, which
// is what makes per-bin assembly tolerable at benchmark scale. Row order per
// list: values first, then one block per gradient dimension, matching
// classify_near_far's expansion.
Eigen::MatrixXd assemble_points_cov(const KernelParams& p, const Eigen::MatrixXd& X,
                                    const std::vector<int>& pts_a,
                                    const std::vector<int>& pts_b,
                                    const std::vector<int>& grad_dims,
                                    bool same_lists) {
    const int na = static_cast<int>(pts_a.size());
    const int nb = static_cast<int>(pts_b.size());
    const int G = static_cast<int>(grad_dims.size());
    const double l2 = p.length_scale * p.length_scale;
    const double inv_l2 = 1.0 / l2;
    const double inv_2l2 = 0.5 * inv_l2;
    const double inv_l4 = inv_l2 * inv_l2;

    Eigen::MatrixXd K(static_cast<Eigen::Index>(na) * (1 + G),
                      static_cast<Eigen::Index>(nb) * (1 + G));
    Eigen::VectorXd diff(X.cols());
    for (int j = 0; j < nb; ++j) {
        const auto xb = X.row(pts_b[static_cast<size_t>(j)]);
        for (int i = 0; i < na; ++i) {
            const auto xa = X.row(pts_a[static_cast<size_t>(i)]);
            diff = xa - xb;
            const double k = p.sigma * std::exp(-diff.squaredNorm() * inv_2l2);
            K(i, j) = k;
            for (int g = 0; g < G; ++g) {
                const double dg = diff[grad_dims[static_cast<size_t>(g)] - 1];
                K(na + g * na + i, j) = -dg * inv_l2 * k;    // d/dx_a
                K(i, nb + g * nb + j) = dg * inv_l2 * k;     // d/dx_b
                for (int h = 0; h < G; ++h) {
                    const double dh = diff[grad_dims[static_cast<size_t>(h)] - 1];
                    const double lterm = (g == h) ? l2 : 0.0;
                    K(na + g * na + i, nb + h * nb + j) = (lterm - dg * dh) * inv_l4 * k;
                }
            }
        }
    }
    if (same_lists) {
        for (int i = 0; i < na; ++i) K(i, i) += p.jitter;
        for (int g = 0; g < G; ++g)
            for (int i = 0; i < na; ++i)
                K(na + g * na + i, na + g * na + i) += p.grad_noise[g];
    }
    return K;
}

Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& S, const std::string& what) {
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
        throw NumericalError(what + ": corrected matrix is not positive definite");
    Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(S.rows(), S.cols()));
    inv = 0.5 * (inv + inv.transpose()).eval();
    return inv;
}

} // namespace

Eigen::MatrixXd schur_of_block(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& C, const Eigen::MatrixXd& D) {
    if (D.rows() != D.cols()) throw std::invalid_argument("schur_of_block: D must be square");
    if (A.rows() != B.rows() || A.cols() != C.cols() || B.cols() != D.rows() ||
        C.rows() != D.rows())
        throw std::invalid_argument("schur_of_block: block shapes do not conform");
    if (D.rows() == 0) return A;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(D);
    if (!lu.isInvertible())
        throw NumericalError("schur_of_block: D block is singular");
    return A - B * lu.solve(C);
}

BinPrecomp precompute_bin(const BinSpec& bin, const KernelParams& p,
                          const Eigen::MatrixXd& X, const std::vector<int>& grad_dims,
                          const Eigen::MatrixXd& Y_rows, const PrecompOptions& opt) {
    p.validate(static_cast<int>(grad_dims.size()));
    const StackedLayout layout{static_cast<int>(X.rows()),
                               grad_dims.empty() ? 0 : static_cast<int>(X.rows()), grad_dims};
    if (Y_rows.rows() != layout.total_rows())
        throw std::invalid_argument("precompute_bin: Y_rows does not match the stacked layout");

    BinPrecomp pre;
    pre.bin_id = bin.id;
    pre.with_schur = opt.with_schur;
    pre.near_rows = bin.near_rows;
    pre.grad_dims = grad_dims;
    pre.near_pt_idx = bin.near_pts;
    pre.near_pts.resize(static_cast<Eigen::Index>(bin.near_pts.size()), X.cols());
    for (size_t i = 0; i < bin.near_pts.size(); ++i)
        pre.near_pts.row(static_cast<Eigen::Index>(i)) = X.row(bin.near_pts[i]);

    Eigen::MatrixXd S = assemble_points_cov(p, X, bin.near_pts, bin.near_pts, grad_dims, true);

    Eigen::MatrixXd Y_fold(static_cast<Eigen::Index>(pre.near_rows.size()), Y_rows.cols());
    for (size_t r = 0; r < pre.near_rows.size(); ++r)
        Y_fold.row(static_cast<Eigen::Index>(r)) = Y_rows.row(pre.near_rows[r]);

    if (opt.with_schur && !bin.far_pts.empty()) {
        Eigen::MatrixXd K_nf =
            assemble_points_cov(p, X, bin.near_pts, bin.far_pts, grad_dims, false);
        Eigen::MatrixXd K_ff =
            assemble_points_cov(p, X, bin.far_pts, bin.far_pts, grad_dims, true);

        // The far set corrects the near block twice over. Dropping the
        // query-far covariance from the exact mean K_q,a K_aa^-1 Y leaves
        // K_qn [(K_aa^-1)_nn Y_n + (K_aa^-1)_nf Y_f], and since
        // (K_aa^-1)_nf = -S^-1 K_nf K_ff^-1 that bracket is
        // S^-1 (Y_n - K_nf K_ff^-1 Y_f): a corrected inverse applied to a
        // corrected target. Both corrections ride one batched far solve.
        Eigen::MatrixXd Y_far(static_cast<Eigen::Index>(bin.far_rows.size()), Y_rows.cols());
        for (size_t r = 0; r < bin.far_rows.size(); ++r)
            Y_far.row(static_cast<Eigen::Index>(r)) = Y_rows.row(bin.far_rows[r]);
        const Eigen::Index nc = K_nf.rows();
        Eigen::MatrixXd rhs(K_ff.rows(), nc + Y_far.cols());
        rhs.leftCols(nc) = K_nf.transpose();
        rhs.rightCols(Y_far.cols()) = Y_far;

        Eigen::MatrixXd Z;   // K_ff^-1 [K_nf^T, Y_far]
        if (opt.mode == SolverMode::cg) {
            CGBatchStats stats;
            Z = cg_solve_multi(K_ff, rhs, opt.solver_tol, opt.max_iters, &stats);
            pre.solver_iterations = stats.max_iterations;
            pre.solver_residual = stats.max_residual;
            if (!stats.all_converged) {
                std::ostringstream os;
                os << "precompute_bin: far-set solve for bin " << bin.id
                   << " did not converge, residual " << stats.max_residual;
                throw NumericalError(os.str());
            }
        } else {
            Eigen::LLT<Eigen::MatrixXd> llt(K_ff);
            if (llt.info() != Eigen::Success)
                throw NumericalError("precompute_bin: far-set covariance factorization failed");
            Z = llt.solve(rhs);
            // one probe column stands in for the per-column residual history
            const Eigen::Index c0 = 0;
            pre.solver_residual =
                (K_ff.selfadjointView<Eigen::Lower>() * Z.col(c0) - rhs.col(c0)).norm() /
                std::max(rhs.col(c0).norm(), 1e-300);
        }
        S -= K_nf * Z.leftCols(nc);
        S = 0.5 * (S + S.transpose()).eval();
        Y_fold -= K_nf * Z.rightCols(Y_far.cols());
    }

    pre.S_inv = invert_spd(S, "precompute_bin");
    pre.W = pre.S_inv * Y_fold;

    if (opt.log) {
        (*opt.log) << "bin=" << bin.id << " near=" << bin.near_pts.size()
                   << " far=" << bin.far_pts.size() << " iters=" << pre.solver_iterations
                   << " residual=" << pre.solver_residual << "\n";
    }
    return pre;
}

PartitionedPrediction predict_partitioned(const Eigen::VectorXd& x_q, const BinPrecomp& pre,
                                          const KernelParams& p) {
    if (x_q.size() != pre.near_pts.cols())
        throw std::invalid_argument("predict_partitioned: query dimension mismatch");
    Eigen::VectorXd k;
    fill_cross_row(p, x_q, pre.near_pts, pre.grad_dims, !pre.grad_dims.empty(), k);

    PartitionedPrediction out;
    out.mean = pre.W.transpose() * k;
    // the neglected far cross-block can push the quadratic form a hair past
    // sigma, so clamp instead of asserting like the dense path does
    out.var = std::max(p.sigma - k.dot(pre.S_inv.selfadjointView<Eigen::Lower>() * k), 0.0);
    return out;
}

} // namespace ggps
