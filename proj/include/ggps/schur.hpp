#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

#include "ggps/kernel.hpp"
#include "ggps/partition.hpp"

// Schur-complement machinery. Offline, each bin folds its far set into a
// corrected inverse S_inv = (K_nn - K_nf K_ff^-1 K_nf^T)^-1 and a corrected
// weight matrix W = S_inv * (Y_near - K_nf K_ff^-1 Y_far), the near-row slice
// of the full K^-1 Y; online prediction then touches only near rows.

namespace ggps {

// A - B * D^-1 * C. D is factorized with full pivoting; a singular D raises
// NumericalError.
Eigen::MatrixXd schur_of_block(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& C, const Eigen::MatrixXd& D);

enum class SolverMode { cg, direct };

struct BinPrecomp {
    int bin_id = 0;
    bool with_schur = true;       // false: S_inv is plain K_nn^-1 (no far correction)
    Eigen::MatrixXd S_inv;        // near-row dimension, symmetric
    Eigen::MatrixXd W;            // S_inv * (Y_near - K_nf K_ff^-1 Y_far), near rows x n_out
    std::vector<int> near_rows;   // global stacked-row order of S_inv/W
    Eigen::MatrixXd near_pts;     // near-point coordinates for kernel-row builds
    std::vector<int> near_pt_idx; // global point indices matching near_pts rows
    std::vector<int> grad_dims;   // empty = value-only rows
    int solver_iterations = 0;
    double solver_residual = 0.0;
};

struct PrecompOptions {
    SolverMode mode = SolverMode::cg;
    double solver_tol = 1e-8;
    int max_iters = 0;        // <= 0: solver default cap
    bool with_schur = true;
    std::ostream* log = nullptr; // per-bin machine-parseable progress line
};

// Offline per-bin precompute. X holds all normalized points; Y_rows is the
// full stacked target matrix (layout rows x n_out). The far-set solve runs
// through CG (spec route) or a direct Cholesky; non-convergence raises
// NumericalError naming the bin and final residual.
BinPrecomp precompute_bin(const BinSpec& bin, const KernelParams& p,
                          const Eigen::MatrixXd& X, const std::vector<int>& grad_dims,
                          const Eigen::MatrixXd& Y_rows, const PrecompOptions& opt);

struct PartitionedPrediction {
    Eigen::VectorXd mean;   // n_out
    double var = 0.0;       // shared scalar, clamped at zero
};

// Online path: one kernel row against the near points, then two products.
// Never touches far-set data (BinPrecomp carries none).
PartitionedPrediction predict_partitioned(const Eigen::VectorXd& x_q, const BinPrecomp& pre,
                                          const KernelParams& p);

// Whole-dataset route for large runs: one packed factorization + inversion of
// the full extended covariance serves every bin, because each bin's corrected
// inverse is exactly the near-row sub-block of the global inverse and its
// weights the near-row slice of K^-1 Y. Emits one BinPrecomp per bin through
// `sink` (bins are not held in memory together).
// Requires with_schur semantics; the uncorrected variant has no global
// shortcut and goes through precompute_bin.
void precompute_all_bins_global(const std::vector<BinSpec>& bins, const KernelParams& p,
                                const Eigen::MatrixXd& X, const std::vector<int>& grad_dims,
                                const Eigen::MatrixXd& Y_rows, std::ostream* log,
                                const std::function<void(BinPrecomp&&)>& sink);

// Flat offset of symmetric entry (i, j) in LAPACK rectangular-full-packed
// storage ('N', 'L'). Layout detail of the global route, exposed so the tests
// can pin it against LAPACK's own dtrttf conversion.
std::size_t rfp_pack_index(std::size_t n, std::size_t i, std::size_t j);

} // namespace ggps
