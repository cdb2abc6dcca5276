#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ggps/kernel.hpp"

// Space partitioning for the local-expert approximation: k-means centroids on
// normalized inputs define Voronoi regions ("bins"), every training point in
// a region is one of its anchors, and the rest of the dataset splits into a
// near set (kernel correlation to some anchor >= eps) and a far set whose
// influence is folded in offline.

namespace ggps {

struct PartitionConfig {
    int n_bins = 1;
    double eps = 1e-3;        // normalized correlation threshold, in (0,1)
    int target_near_size = 0; // approximate near-set size in points; 0 = keep eps
    std::uint64_t seed = 0;
};

struct BinSpec {
    int id = 0;
    Eigen::VectorXd centroid;
    std::vector<int> anchor_idx; // training points inside the Voronoi cell
    std::vector<int> near_pts;   // point-level near set (includes all anchors)
    std::vector<int> far_pts;
    std::vector<int> near_rows;  // row-level expansion, values then gradient blocks
    std::vector<int> far_rows;
};

// Seeded k-means++ with Lloyd refinement. Populations are rebalanced by
// deterministic restarts; the best attempt is kept even when the 2x balance
// target is not met (soft contract, asserted on space-filling inputs in the
// tests). Throws std::invalid_argument when n < n_bins or n_bins < 1.
std::vector<BinSpec> build_bins(const Eigen::MatrixXd& X, const PartitionConfig& cfg);

struct NearFar {
    std::vector<int> near_pts;
    std::vector<int> far_pts;
    std::vector<int> near_rows;
    std::vector<int> far_rows;
};

// Splits all points by max normalized correlation against the anchor set:
// near iff max_a rbf(anchor_a, x)/sigma >= eps. Row expansion groups the
// 1 + |grad_dims| blocks of each point together per the stacked layout.
// Throws std::invalid_argument on an empty anchor set or eps outside (0,1).
NearFar classify_near_far(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& X_all,
                          const KernelParams& p, double eps, const StackedLayout& layout);

// Fills near/far members of every bin in place.
void classify_all_bins(std::vector<BinSpec>& bins, const Eigen::MatrixXd& X,
                       const KernelParams& p, double eps, const StackedLayout& layout);

// Nearest-centroid lookup; ties resolve to the lowest bin id (row index for
// the matrix form, which is what persisted models use at query time).
int locate_bin(const Eigen::VectorXd& x_q, const std::vector<BinSpec>& bins);
int locate_bin(const Eigen::VectorXd& x_q, const Eigen::MatrixXd& centroids);

// Bisects eps so the mean near-set size lands close to target points.
double derive_eps(const Eigen::MatrixXd& X, const std::vector<BinSpec>& bins,
                  const KernelParams& p, int target_near_size);

// Text summary: per-bin populations and near/far counts, plus the measured
// correlation slack delta = max over sampled interior queries of
// (max far-set correlation - eps), clamped at zero.
std::string partition_report(const std::vector<BinSpec>& bins, const Eigen::MatrixXd& X,
                             const KernelParams& p, double eps, std::uint64_t seed = 1);

} // namespace ggps
