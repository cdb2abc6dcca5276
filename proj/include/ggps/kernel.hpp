#pragma once

#include <Eigen/Dense>
#include <vector>

// RBF kernel, its first and second derivative forms, and assembly of the
// extended covariance that mixes function-value and gradient observations.
//
// Derivative index convention used throughout: index 0 denotes the function
// value itself, index n in [1, d] denotes the partial derivative with respect
// to input dimension n. Gradient rows of the extended covariance are grouped
// direction-first: all value rows, then all rows for the first gradient
// dimension, then the second, and so on. That ordering is part of the
// persisted model layout, not an implementation detail.

namespace ggps {

struct KernelParams {
    double sigma = 1.0;         // signal variance
    double length_scale = 0.5;  // shared isotropic length scale (normalized inputs)
    double jitter = 1e-10;      // nugget added to value-row diagonal
    Eigen::VectorXd grad_noise; // per-direction gradient noise variance (lambda^2)

    // Throws std::invalid_argument on non-positive sigma/length_scale,
    // negative jitter, or negative gradient-noise entries. n_grad_dims is the
    // number of gradient directions the params must cover.
    void validate(int n_grad_dims) const;
};

// Row bookkeeping for the stacked observation vector
// [values; d/dx_{g1}; d/dx_{g2}; ...] shared by covariance assembly,
// partitioning and the Schur precompute.
struct StackedLayout {
    int n_d = 0;                // number of value observations
    int n_g = 0;                // number of gradient observation points
    std::vector<int> grad_dims; // 1-based input dims carrying gradients, ascending

    int n_blocks() const { return 1 + static_cast<int>(grad_dims.size()); }
    int total_rows() const { return n_d + static_cast<int>(grad_dims.size()) * n_g; }
    int value_row(int i) const { return i; }
    // g indexes into grad_dims, i is the gradient point index.
    int grad_row(int g, int i) const { return n_d + g * n_g + i; }
};

// k(x,x') = sigma * exp(-||x - x'||^2 / (2 l^2)).
// Throws std::invalid_argument on size mismatch or non-finite input.
double rbf_eval(const KernelParams& p, const Eigen::VectorXd& x, const Eigen::VectorXd& x2);

// Covariance between derivative observations of a GP with RBF kernel:
//   n = 0, m = 0:  k(x, x2)
//   n > 0, m = 0:  d k / d x_n        = -(x_n - x2_n)/l^2 * k
//   n = 0, m > 0:  d k / d x2_m       = +(x_m - x2_m)/l^2 * k
//   n > 0, m > 0:  d^2 k / dx_n dx2_m
//                  = (l^2 [n==m] - (x_n - x2_n)(x_m - x2_m)) / l^4 * k
// Throws std::invalid_argument when n or m lies outside [0, d].
double deriv_kernel_eval(const KernelParams& p, int n, int m,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& x2);

// Noise-augmented extended covariance over value points Xd (rows) and
// gradient points Xg, for the gradient directions in grad_dims. Value rows
// get +jitter on the diagonal, the block for direction g gets +grad_noise[g].
// Xg may have zero rows (plain value-only GP).
Eigen::MatrixXd assemble_training_cov(const KernelParams& p,
                                      const Eigen::MatrixXd& Xd,
                                      const Eigen::MatrixXd& Xg,
                                      const std::vector<int>& grad_dims);

// Cross covariance between query values and the stacked training rows:
// [k00(Xq, Xd), k0m(Xq, Xg) for each m in grad_dims]. No noise terms.
Eigen::MatrixXd assemble_query_cross(const KernelParams& p,
                                     const Eigen::MatrixXd& Xq,
                                     const Eigen::MatrixXd& Xd,
                                     const Eigen::MatrixXd& Xg,
                                     const std::vector<int>& grad_dims);

// Extended covariance plus its row layout.
struct CovBlocks {
    Eigen::MatrixXd k_train;
    StackedLayout layout;
};

CovBlocks build_cov_blocks(const KernelParams& p,
                           const Eigen::MatrixXd& Xd,
                           const Eigen::MatrixXd& Xg,
                           const std::vector<int>& grad_dims);

// Decoded identity of one stacked row: dir = 0 for a value row, otherwise the
// 1-based input dimension whose partial derivative the row observes.
struct RowRef {
    int dir = 0;
    int point = 0;
};
RowRef decode_row(const StackedLayout& layout, int row);

// Covariance sub-block between two lists of stacked row indices over a single
// point set X (value and gradient rows both reference X, so layout.n_d and
// layout.n_g must equal X.rows()). Noise lands wherever the two global row
// indices coincide; passing the same list twice therefore reproduces the
// corresponding sub-block of assemble_training_cov(p, X, X, grad_dims)
// exactly. Used by the per-bin precompute, which never materializes the full
// covariance.
Eigen::MatrixXd assemble_rows_cov(const KernelParams& p, const Eigen::MatrixXd& X,
                                  const StackedLayout& layout,
                                  const std::vector<int>& rows_a,
                                  const std::vector<int>& rows_b);

// Hot-path variant of assemble_query_cross for a single query against one
// bin's near points: one kernel evaluation per point, reused across the value
// entry and every gradient direction. `out` is resized to
// pts.rows() * (1 + grad_dims.size()) when with_grads, else pts.rows().
// No validation; callers sit behind the public assembly functions.
void fill_cross_row(const KernelParams& p, const Eigen::VectorXd& x,
                    const Eigen::MatrixXd& pts, const std::vector<int>& grad_dims,
                    bool with_grads, Eigen::VectorXd& out);

} // namespace ggps
