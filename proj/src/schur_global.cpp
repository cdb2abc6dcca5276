#include <lapacke.h>

#include <cmath>
#include <cstddef>
#include <ostream>
#include <sstream>
#include <vector>

#include "ggps/errors.hpp"
#include "ggps/schur.hpp"

// Whole-dataset precompute. The block-inversion identity says the corrected
// inverse (K|K_ff)^-1 of any bin equals the near-row sub-block of the global
// inverse K^-1, so ONE factorization + inversion serves every bin. The global
// matrix is held in LAPACK's rectangular full packed (RFP) format, which
// stores only n(n+1)/2 doubles yet keeps blocked-speed dpftrf/dpftri.

namespace ggps {

namespace {

// Flat position of lower-triangle entry (i, j), i >= j, inside the RFP array
// for TRANSR='N', UPLO='L', 0-based. Validated against LAPACKE_dtrttf in the
// unit tests.
inline std::size_t rfp_low(std::size_t n, std::size_t i, std::size_t j) {
    const std::size_t k = n / 2;
    if (n % 2) {
        if (j <= k) return i + j * n;
        return (j - k - 1) + (i - k) * n;
    }
    if (j < k) return (i + 1) + j * (n + 1);
    return (j - k) + (i - k) * (n + 1);
}

} // namespace

// Exposed for the layout unit test only.
std::size_t rfp_pack_index(std::size_t n, std::size_t i, std::size_t j) {
    return i >= j ? rfp_low(n, i, j) : rfp_low(n, j, i);
}

void precompute_all_bins_global(const std::vector<BinSpec>& bins, const KernelParams& p,
                                const Eigen::MatrixXd& X, const std::vector<int>& grad_dims,
                                const Eigen::MatrixXd& Y_rows, std::ostream* log,
                                const std::function<void(BinPrecomp&&)>& sink) {
    p.validate(static_cast<int>(grad_dims.size()));
    const int npts = static_cast<int>(X.rows());
    const int G = static_cast<int>(grad_dims.size());
    const StackedLayout layout{npts, G ? npts : 0, grad_dims};
    const std::size_t n = static_cast<std::size_t>(layout.total_rows());
    if (Y_rows.rows() != static_cast<Eigen::Index>(n))
        throw std::invalid_argument("precompute_all_bins_global: Y_rows/layout mismatch");

    std::vector<double> ap(n * (n + 1) / 2);

    // Assemble the lower triangle straight into packed storage, one kernel
    // evaluation per ordered point pair feeding every derivative block that
    // pair owns below the diagonal.
    const double l2 = p.length_scale * p.length_scale;
    const double inv_l2 = 1.0 / l2;
    const double inv_2l2 = 0.5 * inv_l2;
    const double inv_l4 = inv_l2 * inv_l2;
    const std::size_t un = static_cast<std::size_t>(npts);
    Eigen::VectorXd diff(X.cols());
    for (int b = 0; b < npts; ++b) {
        const auto xb = X.row(b);
        for (int a = 0; a < npts; ++a) {
            diff = X.row(a) - xb;
            const double k = p.sigma * std::exp(-diff.squaredNorm() * inv_2l2);
            const std::size_t ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
            if (a >= b) ap[rfp_low(n, ua, ub)] = k;
            for (int g = 0; g < G; ++g) {
                const double dg = diff[grad_dims[static_cast<size_t>(g)] - 1];
                const std::size_t rg = un + static_cast<std::size_t>(g) * un + ua;
                ap[rfp_low(n, rg, ub)] = -dg * inv_l2 * k;
                if (a >= b)
                    ap[rfp_low(n, rg, un + static_cast<std::size_t>(g) * un + ub)] =
                        (l2 - dg * dg) * inv_l4 * k;
                for (int h = 0; h < g; ++h) {
                    const double dh = diff[grad_dims[static_cast<size_t>(h)] - 1];
                    ap[rfp_low(n, rg, un + static_cast<std::size_t>(h) * un + ub)] =
                        -dg * dh * inv_l4 * k;
                }
            }
        }
    }
    for (std::size_t i = 0; i < un; ++i) ap[rfp_low(n, i, i)] += p.jitter;
    for (int g = 0; g < G; ++g)
        for (std::size_t i = 0; i < un; ++i) {
            const std::size_t r = un + static_cast<std::size_t>(g) * un + i;
            ap[rfp_low(n, r, r)] += p.grad_noise[g];
        }

    lapack_int info = LAPACKE_dpftrf(LAPACK_COL_MAJOR, 'N', 'L',
                                     static_cast<lapack_int>(n), ap.data());
    if (info != 0) {
        std::ostringstream os;
        os << "global precompute: packed Cholesky failed, info=" << info;
        throw NumericalError(os.str());
    }

    // Weight columns Z = K^-1 Y via two triangular solves against the packed
    // factor, before dpftri overwrites it with the inverse. Each bin's W is
    // then the near-row slice of Z, which the block-inversion identity equates
    // with S^-1 (Y_n - K_nf K_ff^-1 Y_f): the same corrected target the
    // per-bin route folds explicitly.
    Eigen::MatrixXd Z = Y_rows;
    for (char trans : {'N', 'T'}) {
        info = LAPACKE_dtfsm(LAPACK_COL_MAJOR, 'N', 'L', 'L', trans, 'N',
                             static_cast<lapack_int>(n), static_cast<lapack_int>(Z.cols()), 1.0,
                             ap.data(), Z.data(), static_cast<lapack_int>(n));
        if (info != 0) {
            std::ostringstream os;
            os << "global precompute: packed weight solve failed, info=" << info;
            throw NumericalError(os.str());
        }
    }

    info = LAPACKE_dpftri(LAPACK_COL_MAJOR, 'N', 'L', static_cast<lapack_int>(n), ap.data());
    if (info != 0) {
        std::ostringstream os;
        os << "global precompute: packed inversion failed, info=" << info;
        throw NumericalError(os.str());
    }

    for (const auto& bin : bins) {
        BinPrecomp pre;
        pre.bin_id = bin.id;
        pre.with_schur = true;
        pre.near_rows = bin.near_rows;
        pre.grad_dims = grad_dims;
        pre.near_pt_idx = bin.near_pts;
        pre.near_pts.resize(static_cast<Eigen::Index>(bin.near_pts.size()), X.cols());
        for (size_t i = 0; i < bin.near_pts.size(); ++i)
            pre.near_pts.row(static_cast<Eigen::Index>(i)) = X.row(bin.near_pts[i]);

        const Eigen::Index m = static_cast<Eigen::Index>(bin.near_rows.size());
        pre.S_inv.resize(m, m);
        for (Eigen::Index c = 0; c < m; ++c) {
            const std::size_t gc = static_cast<std::size_t>(bin.near_rows[static_cast<size_t>(c)]);
            for (Eigen::Index r = c; r < m; ++r) {
                const std::size_t gr =
                    static_cast<std::size_t>(bin.near_rows[static_cast<size_t>(r)]);
                const double v = ap[rfp_pack_index(n, gr, gc)];
                pre.S_inv(r, c) = v;
                pre.S_inv(c, r) = v;
            }
        }

        pre.W.resize(m, Y_rows.cols());
        for (Eigen::Index r = 0; r < m; ++r)
            pre.W.row(r) = Z.row(bin.near_rows[static_cast<size_t>(r)]);

        if (log)
            (*log) << "bin=" << bin.id << " near=" << bin.near_pts.size()
                   << " far=" << bin.far_pts.size() << " iters=0 residual=0 route=global\n";
        sink(std::move(pre));
    }
}

} // namespace ggps
