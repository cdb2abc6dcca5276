#pragma once

#include <Eigen/Dense>

#include "ggps/kernel.hpp"

// Exact (dense) GP regression over the stacked value+gradient observations.
// Serves as the reference implementation the partitioned path is checked
// against, and as the dense baselines in the variant comparison.

namespace ggps {

struct DenseGPModel {
    KernelParams params;
    StackedLayout layout;
    Eigen::MatrixXd Xd;    // value observation inputs
    Eigen::MatrixXd Xg;    // gradient observation inputs (may be empty)
    Eigen::MatrixXd alpha; // K^-1 Y, rows match the stacked layout
    Eigen::LLT<Eigen::MatrixXd> chol;

    // Solves K z = b against the stored factor (test probes, variance).
    Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const { return chol.solve(b); }
};

struct GPPrediction {
    Eigen::MatrixXd mean; // n_q x n_out
    Eigen::VectorXd var;  // n_q, shared across outputs
};

// Factorizes the noise-augmented extended covariance and stores K^-1 Y.
// Y rows must match the stacked layout (values first, then gradient rows
// grouped by direction). Throws ggps::NumericalError when the factorization
// fails, naming the offending minimum pivot.
DenseGPModel fit_dense(const KernelParams& p,
                       const Eigen::MatrixXd& Xd,
                       const Eigen::MatrixXd& Xg,
                       const std::vector<int>& grad_dims,
                       const Eigen::MatrixXd& Y);

// Value-only prediction; requires a model fitted without gradient rows.
GPPrediction predict_standard(const DenseGPModel& m, const Eigen::MatrixXd& Xq);

// Prediction conditioned on values and gradients. With n_g = 0 this is the
// same code path as predict_standard.
GPPrediction predict_with_gradients(const DenseGPModel& m, const Eigen::MatrixXd& Xq);

} // namespace ggps
