#include "ggps/solve.hpp"

#include <cmath>
#include <stdexcept>

namespace ggps {

CGResult cg_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                  double tol, int max_iters) {
    const auto n = A.rows();
    if (A.cols() != n || b.size() != n)
        throw std::invalid_argument("cg_solve: dimension mismatch");

    CGResult out;
    out.x = Eigen::VectorXd::Zero(n);

    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        out.converged = true;
        return out;
    }
    if (max_iters <= 0) max_iters = static_cast<int>(4 * n + 50);

    // Jacobi preconditioner; the assembled covariances always carry jitter on
    // the diagonal so the entries are safely positive.
    Eigen::VectorXd dinv = A.diagonal().cwiseMax(1e-300).cwiseInverse();

    Eigen::VectorXd r = b;                          // x0 = 0
    Eigen::VectorXd z = dinv.cwiseProduct(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);

    for (int it = 1; it <= max_iters; ++it) {
        Eigen::VectorXd Ap = A.selfadjointView<Eigen::Lower>() * p;
        const double pAp = p.dot(Ap);
        if (!(pAp > 0.0)) break;   // lost positive definiteness to roundoff
        const double alpha = rz / pAp;
        out.x += alpha * p;
        r -= alpha * Ap;
        out.iterations = it;
        out.residual = r.norm() / bnorm;
        if (out.residual <= tol) {
            out.converged = true;
            return out;
        }
        z = dinv.cwiseProduct(r);
        const double rz_next = r.dot(z);
        p = z + (rz_next / rz) * p;
        rz = rz_next;
    }
    out.residual = (A.selfadjointView<Eigen::Lower>() * out.x - b).norm() / bnorm;
    out.converged = out.residual <= tol;
    return out;
}

Eigen::MatrixXd cg_solve_multi(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                               double tol, int max_iters, CGBatchStats* stats) {
    Eigen::MatrixXd X(A.rows(), B.cols());
    CGBatchStats acc;
    for (Eigen::Index c = 0; c < B.cols(); ++c) {
        CGResult r = cg_solve(A, B.col(c), tol, max_iters);
        X.col(c) = r.x;
        acc.max_iterations = std::max(acc.max_iterations, r.iterations);
        acc.max_residual = std::max(acc.max_residual, r.residual);
        acc.all_converged = acc.all_converged && r.converged;
    }
    if (stats) *stats = acc;
    return X;
}

} // namespace ggps
