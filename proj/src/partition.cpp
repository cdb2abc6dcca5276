#include "ggps/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ggps {

namespace {

double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Squared distance from every row of X to its nearest row of C.
Eigen::VectorXd nearest_sq_dist(const Eigen::MatrixXd& X, const Eigen::MatrixXd& C) {
    Eigen::VectorXd d = Eigen::VectorXd::Constant(X.rows(), std::numeric_limits<double>::max());
    for (Eigen::Index c = 0; c < C.rows(); ++c)
        d = d.cwiseMin((X.rowwise() - C.row(c)).rowwise().squaredNorm());
    return d;
}

Eigen::MatrixXd kmeanspp_seed(const Eigen::MatrixXd& X, int k, std::mt19937_64& rng) {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd C(k, X.cols());
    C.row(0) = X.row(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n)));
    Eigen::VectorXd d2 = (X.rowwise() - C.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        // sample proportionally to squared distance via the cumulative sum
        const double total = d2.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            const double u = unit_uniform(rng) * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[i];
                if (u <= acc) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
        }
        C.row(c) = X.row(pick);
        d2 = d2.cwiseMin((X.rowwise() - C.row(c)).rowwise().squaredNorm());
    }
    return C;
}

std::vector<int> assign_nearest(const Eigen::MatrixXd& X, const Eigen::MatrixXd& C) {
    std::vector<int> a(static_cast<size_t>(X.rows()), 0);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double best = std::numeric_limits<double>::max();
        for (Eigen::Index c = 0; c < C.rows(); ++c) {
            const double d = (X.row(i) - C.row(c)).squaredNorm();
            if (d < best) {   // strict: ties stay with the lower id
                best = d;
                a[static_cast<size_t>(i)] = static_cast<int>(c);
            }
        }
    }
    return a;
}

struct KMeansRun {
    Eigen::MatrixXd centroids;
    std::vector<int> assign;
    double balance = std::numeric_limits<double>::max(); // max(max/mean, mean/min)
};

KMeansRun lloyd(const Eigen::MatrixXd& X, int k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    KMeansRun run;
    run.centroids = kmeanspp_seed(X, k, rng);
    run.assign = assign_nearest(X, run.centroids);
    for (int iter = 0; iter < 100; ++iter) {
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, X.cols());
        std::vector<int> counts(static_cast<size_t>(k), 0);
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            sums.row(run.assign[static_cast<size_t>(i)]) += X.row(i);
            ++counts[static_cast<size_t>(run.assign[static_cast<size_t>(i)])];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<size_t>(c)] > 0) {
                run.centroids.row(c) = sums.row(c) / counts[static_cast<size_t>(c)];
            } else {
                // revive an empty cluster at the globally farthest point
                Eigen::VectorXd d2 = nearest_sq_dist(X, run.centroids);
                Eigen::Index far_i;
                d2.maxCoeff(&far_i);
                run.centroids.row(c) = X.row(far_i);
            }
        }
        auto next = assign_nearest(X, run.centroids);
        const bool stable = next == run.assign;
        run.assign = std::move(next);
        if (stable) break;
    }
    int mx = 0, mn = static_cast<int>(X.rows());
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (int a : run.assign) ++counts[static_cast<size_t>(a)];
    for (int c : counts) {
        mx = std::max(mx, c);
        mn = std::min(mn, c);
    }
    const double mean = static_cast<double>(X.rows()) / k;
    run.balance = std::max(mx / mean, mn > 0 ? mean / mn : std::numeric_limits<double>::max());
    return run;
}

} // namespace

std::vector<BinSpec> build_bins(const Eigen::MatrixXd& X, const PartitionConfig& cfg) {
    if (cfg.n_bins < 1) throw std::invalid_argument("build_bins: n_bins must be >= 1");
    if (X.rows() < cfg.n_bins)
        throw std::invalid_argument("build_bins: fewer points than bins");

    KMeansRun best;
    if (cfg.n_bins == 1) {
        best.centroids = X.colwise().mean();
        best.assign.assign(static_cast<size_t>(X.rows()), 0);
    } else {
        for (std::uint64_t attempt = 0; attempt < 8; ++attempt) {
            KMeansRun run = lloyd(X, cfg.n_bins, cfg.seed * 1000003u + attempt);
            if (run.balance < best.balance) best = std::move(run);
            if (best.balance <= 2.0) break;
        }
    }

    std::vector<BinSpec> bins(static_cast<size_t>(cfg.n_bins));
    for (int c = 0; c < cfg.n_bins; ++c) {
        bins[static_cast<size_t>(c)].id = c;
        bins[static_cast<size_t>(c)].centroid = best.centroids.row(c);
    }
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        bins[static_cast<size_t>(best.assign[static_cast<size_t>(i)])].anchor_idx.push_back(
            static_cast<int>(i));
    return bins;
}

NearFar classify_near_far(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& X_all,
                          const KernelParams& p, double eps, const StackedLayout& layout) {
    if (anchors.rows() == 0) throw std::invalid_argument("classify_near_far: empty anchor set");
    if (!(eps > 0.0 && eps < 1.0))
        throw std::invalid_argument("classify_near_far: eps must lie in (0,1)");
    if (anchors.cols() != X_all.cols())
        throw std::invalid_argument("classify_near_far: dimension mismatch");

    // rbf/sigma >= eps is equivalent to a squared-distance cutoff, so the
    // split needs no kernel evaluations at all
    const double l2 = p.length_scale * p.length_scale;
    const double cutoff = -2.0 * l2 * std::log(eps);

    NearFar nf;
    const Eigen::VectorXd d2 = nearest_sq_dist(X_all, anchors);
    for (Eigen::Index i = 0; i < X_all.rows(); ++i) {
        if (d2[i] <= cutoff)
            nf.near_pts.push_back(static_cast<int>(i));
        else
            nf.far_pts.push_back(static_cast<int>(i));
    }

    auto expand = [&](const std::vector<int>& pts, std::vector<int>& rows) {
        rows.reserve(pts.size() * static_cast<size_t>(layout.n_blocks()));
        for (int i : pts) rows.push_back(layout.value_row(i));
        for (int g = 0; g < static_cast<int>(layout.grad_dims.size()); ++g)
            for (int i : pts) rows.push_back(layout.grad_row(g, i));
    };
    expand(nf.near_pts, nf.near_rows);
    expand(nf.far_pts, nf.far_rows);
    return nf;
}

void classify_all_bins(std::vector<BinSpec>& bins, const Eigen::MatrixXd& X,
                       const KernelParams& p, double eps, const StackedLayout& layout) {
    for (auto& bin : bins) {
        Eigen::MatrixXd anchors(bin.anchor_idx.size(), X.cols());
        for (size_t a = 0; a < bin.anchor_idx.size(); ++a)
            anchors.row(static_cast<Eigen::Index>(a)) = X.row(bin.anchor_idx[a]);
        NearFar nf = classify_near_far(anchors, X, p, eps, layout);
        bin.near_pts = std::move(nf.near_pts);
        bin.far_pts = std::move(nf.far_pts);
        bin.near_rows = std::move(nf.near_rows);
        bin.far_rows = std::move(nf.far_rows);
    }
}

int locate_bin(const Eigen::VectorXd& x_q, const std::vector<BinSpec>& bins) {
    if (bins.empty()) throw std::invalid_argument("locate_bin: no bins");
    int best = 0;
    double best_d = std::numeric_limits<double>::max();
    for (const auto& bin : bins) {
        const double d = (x_q - bin.centroid).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = bin.id;
        }
    }
    return best;
}

int locate_bin(const Eigen::VectorXd& x_q, const Eigen::MatrixXd& centroids) {
    if (centroids.rows() == 0) throw std::invalid_argument("locate_bin: no bins");
    int best = 0;
    double best_d = std::numeric_limits<double>::max();
    for (Eigen::Index i = 0; i < centroids.rows(); ++i) {
        const double d = (x_q - centroids.row(i).transpose()).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

double derive_eps(const Eigen::MatrixXd& X, const std::vector<BinSpec>& bins,
                  const KernelParams& p, int target_near_size) {
    if (bins.empty()) throw std::invalid_argument("derive_eps: no bins");
    if (target_near_size < 1) throw std::invalid_argument("derive_eps: target must be positive");

    // per bin: sorted squared distances to the nearest anchor; the near count
    // at squared-distance threshold t is then a binary search
    std::vector<std::vector<double>> sorted_d2(bins.size());
    for (size_t b = 0; b < bins.size(); ++b) {
        Eigen::MatrixXd anchors(bins[b].anchor_idx.size(), X.cols());
        for (size_t a = 0; a < bins[b].anchor_idx.size(); ++a)
            anchors.row(static_cast<Eigen::Index>(a)) = X.row(bins[b].anchor_idx[a]);
        Eigen::VectorXd d2 = nearest_sq_dist(X, anchors);
        sorted_d2[b].assign(d2.data(), d2.data() + d2.size());
        std::sort(sorted_d2[b].begin(), sorted_d2[b].end());
    }
    auto mean_near = [&](double t) {
        double total = 0.0;
        for (const auto& v : sorted_d2)
            total += static_cast<double>(
                std::upper_bound(v.begin(), v.end(), t) - v.begin());
        return total / static_cast<double>(sorted_d2.size());
    };

    const double l2 = p.length_scale * p.length_scale;
    double lo = 0.0, hi = 2.0 * l2 * 34.0;   // eps floor ~ exp(-34) ~ 2e-15
    if (mean_near(hi) <= target_near_size) return std::exp(-hi / (2.0 * l2));
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mean_near(mid) < target_near_size)
            lo = mid;
        else
            hi = mid;
    }
    const double eps = std::exp(-hi / (2.0 * l2));
    return std::min(std::max(eps, 2e-15), 1.0 - 1e-12);
}

std::string partition_report(const std::vector<BinSpec>& bins, const Eigen::MatrixXd& X,
                             const KernelParams& p, double eps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double l2 = p.length_scale * p.length_scale;
    double delta = 0.0;
    std::ostringstream os;
    os << "partition bins=" << bins.size() << " eps=" << eps << "\n";
    for (const auto& bin : bins) {
        os << "bin=" << bin.id << " pop=" << bin.anchor_idx.size()
           << " near=" << bin.near_pts.size() << " far=" << bin.far_pts.size() << "\n";
        if (bin.far_pts.empty() || bin.anchor_idx.size() < 2) continue;
        Eigen::MatrixXd far_pts(bin.far_pts.size(), X.cols());
        for (size_t f = 0; f < bin.far_pts.size(); ++f)
            far_pts.row(static_cast<Eigen::Index>(f)) = X.row(bin.far_pts[f]);
        // interior queries: convex combinations of random anchor pairs
        for (int t = 0; t < 64; ++t) {
            const auto na = bin.anchor_idx.size();
            const Eigen::VectorXd a = X.row(bin.anchor_idx[rng() % na]);
            const Eigen::VectorXd b = X.row(bin.anchor_idx[rng() % na]);
            const double u = unit_uniform(rng);
            const Eigen::VectorXd q = u * a + (1.0 - u) * b;
            const double d2 = (far_pts.rowwise() - q.transpose()).rowwise().squaredNorm().minCoeff();
            delta = std::max(delta, std::exp(-d2 / (2.0 * l2)) - eps);
        }
    }
    os << "interior_query_slack_delta=" << std::max(delta, 0.0) << "\n";
    return os.str();
}

} // namespace ggps
