#pragma once

#include <Eigen/Dense>

namespace ggps {

struct CGResult {
    Eigen::VectorXd x;
    int iterations = 0;
    double residual = 0.0;   // final relative residual ||Ax-b||/||b||
    bool converged = false;
};

// Conjugate gradients with a Jacobi (diagonal) preconditioner for symmetric
// positive definite systems. max_iters <= 0 picks a cap of 4n+50. The caller
// decides whether a non-converged result is fatal.
CGResult cg_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                  double tol = 1e-8, int max_iters = 0);

struct CGBatchStats {
    int max_iterations = 0;
    double max_residual = 0.0;
    bool all_converged = true;
};

// Column-by-column CG over multiple right-hand sides.
Eigen::MatrixXd cg_solve_multi(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                               double tol, int max_iters, CGBatchStats* stats = nullptr);

} // namespace ggps
