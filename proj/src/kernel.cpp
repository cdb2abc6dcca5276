#include "ggps/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace ggps {

void KernelParams::validate(int n_grad_dims) const {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("KernelParams: sigma must be positive");
    if (!(length_scale > 0.0) || !std::isfinite(length_scale))
        throw std::invalid_argument("KernelParams: length_scale must be positive");
    if (jitter < 0.0 || !std::isfinite(jitter))
        throw std::invalid_argument("KernelParams: jitter must be non-negative");
    if (grad_noise.size() < n_grad_dims)
        throw std::invalid_argument("KernelParams: grad_noise shorter than gradient dimension count");
    for (int i = 0; i < n_grad_dims; ++i)
        if (grad_noise[i] < 0.0 || !std::isfinite(grad_noise[i]))
            throw std::invalid_argument("KernelParams: grad_noise entries must be non-negative");
}

namespace {

void check_pair(const Eigen::VectorXd& x, const Eigen::VectorXd& x2) {
    if (x.size() != x2.size())
        throw std::invalid_argument("kernel: input dimension mismatch");
    if (!x.allFinite() || !x2.allFinite())
        throw std::invalid_argument("kernel: non-finite input");
}

} // namespace

double rbf_eval(const KernelParams& p, const Eigen::VectorXd& x, const Eigen::VectorXd& x2) {
    check_pair(x, x2);
    const double d2 = (x - x2).squaredNorm();
    return p.sigma * std::exp(-d2 / (2.0 * p.length_scale * p.length_scale));
}

double deriv_kernel_eval(const KernelParams& p, int n, int m,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& x2) {
    check_pair(x, x2);
    const int d = static_cast<int>(x.size());
    if (n < 0 || n > d || m < 0 || m > d)
        throw std::invalid_argument("deriv_kernel_eval: derivative index out of range");

    const double l2 = p.length_scale * p.length_scale;
    const double k = p.sigma * std::exp(-(x - x2).squaredNorm() / (2.0 * l2));
    if (n == 0 && m == 0) return k;
    if (m == 0) return -(x[n - 1] - x2[n - 1]) / l2 * k;
    if (n == 0) return (x[m - 1] - x2[m - 1]) / l2 * k;

    const double dn = x[n - 1] - x2[n - 1];
    const double dm = x[m - 1] - x2[m - 1];
    const double num = (n == m) ? (l2 - dn * dn) : (-dn * dm);
    return num / (l2 * l2) * k;
}

namespace {

void check_assembly_inputs(const KernelParams& p,
                           const Eigen::MatrixXd& Xd,
                           const Eigen::MatrixXd& Xg,
                           const std::vector<int>& grad_dims) {
    p.validate(static_cast<int>(grad_dims.size()));
    if (Xg.rows() > 0 && Xd.cols() > 0 && Xg.cols() != Xd.cols())
        throw std::invalid_argument("covariance assembly: Xd/Xg dimension mismatch");
    const int d = static_cast<int>(Xd.cols() > 0 ? Xd.cols() : Xg.cols());
    int prev = 0;
    for (int g : grad_dims) {
        if (g < 1 || g > d)
            throw std::invalid_argument("covariance assembly: gradient dimension out of range");
        if (g <= prev)
            throw std::invalid_argument("covariance assembly: grad_dims must be strictly ascending");
        prev = g;
    }
    if (!Xd.allFinite() || !Xg.allFinite())
        throw std::invalid_argument("covariance assembly: non-finite inputs");
}

} // namespace

Eigen::MatrixXd assemble_training_cov(const KernelParams& p,
                                      const Eigen::MatrixXd& Xd,
                                      const Eigen::MatrixXd& Xg,
                                      const std::vector<int>& grad_dims) {
    check_assembly_inputs(p, Xd, Xg, grad_dims);
    const int nd = static_cast<int>(Xd.rows());
    const int ng = static_cast<int>(Xg.rows());
    const int nb = static_cast<int>(grad_dims.size());
    StackedLayout lay{nd, ng, grad_dims};
    const int n = lay.total_rows();

    const double l2 = p.length_scale * p.length_scale;
    const double l4 = l2 * l2;
    Eigen::MatrixXd K(n, n);

    // value x value
    for (int i = 0; i < nd; ++i) {
        for (int j = 0; j <= i; ++j) {
            const double k = p.sigma * std::exp(-(Xd.row(i) - Xd.row(j)).squaredNorm() / (2.0 * l2));
            K(i, j) = k;
            K(j, i) = k;
        }
        K(i, i) += p.jitter;
    }

    // value x gradient blocks: cov(f(xd_i), df(xg_j)/dx_m) = k_0m(xd_i, xg_j)
    for (int g = 0; g < nb; ++g) {
        const int m = grad_dims[g] - 1;
        for (int i = 0; i < nd; ++i) {
            for (int j = 0; j < ng; ++j) {
                const double k = p.sigma * std::exp(-(Xd.row(i) - Xg.row(j)).squaredNorm() / (2.0 * l2));
                const double v = (Xd(i, m) - Xg(j, m)) / l2 * k;
                K(lay.value_row(i), lay.grad_row(g, j)) = v;
                K(lay.grad_row(g, j), lay.value_row(i)) = v;
            }
        }
    }

    // gradient x gradient blocks
    for (int ga = 0; ga < nb; ++ga) {
        const int a = grad_dims[ga] - 1;
        for (int gb = 0; gb <= ga; ++gb) {
            const int b = grad_dims[gb] - 1;
            for (int i = 0; i < ng; ++i) {
                const int jmax = (ga == gb) ? i : ng - 1;
                for (int j = 0; j <= jmax; ++j) {
                    const Eigen::RowVectorXd diff = Xg.row(i) - Xg.row(j);
                    const double k = p.sigma * std::exp(-diff.squaredNorm() / (2.0 * l2));
                    const double num = (a == b) ? (l2 - diff[a] * diff[a]) : (-diff[a] * diff[b]);
                    const double v = num / l4 * k;
                    K(lay.grad_row(ga, i), lay.grad_row(gb, j)) = v;
                    K(lay.grad_row(gb, j), lay.grad_row(ga, i)) = v;
                }
            }
        }
        for (int i = 0; i < ng; ++i)
            K(lay.grad_row(ga, i), lay.grad_row(ga, i)) += p.grad_noise[ga];
    }

    return K;
}

Eigen::MatrixXd assemble_query_cross(const KernelParams& p,
                                     const Eigen::MatrixXd& Xq,
                                     const Eigen::MatrixXd& Xd,
                                     const Eigen::MatrixXd& Xg,
                                     const std::vector<int>& grad_dims) {
    check_assembly_inputs(p, Xd, Xg, grad_dims);
    if (!Xq.allFinite())
        throw std::invalid_argument("assemble_query_cross: non-finite query");
    if (Xd.rows() > 0 && Xq.cols() != Xd.cols())
        throw std::invalid_argument("assemble_query_cross: query dimension mismatch");

    const int nq = static_cast<int>(Xq.rows());
    const int nd = static_cast<int>(Xd.rows());
    const int ng = static_cast<int>(Xg.rows());
    const int nb = static_cast<int>(grad_dims.size());
    StackedLayout lay{nd, ng, grad_dims};

    const double l2 = p.length_scale * p.length_scale;
    Eigen::MatrixXd C(nq, lay.total_rows());
    for (int q = 0; q < nq; ++q) {
        for (int j = 0; j < nd; ++j)
            C(q, j) = p.sigma * std::exp(-(Xq.row(q) - Xd.row(j)).squaredNorm() / (2.0 * l2));
        for (int g = 0; g < nb; ++g) {
            const int m = grad_dims[g] - 1;
            for (int j = 0; j < ng; ++j) {
                const double k = p.sigma * std::exp(-(Xq.row(q) - Xg.row(j)).squaredNorm() / (2.0 * l2));
                C(q, lay.grad_row(g, j)) = (Xq(q, m) - Xg(j, m)) / l2 * k;
            }
        }
    }
    return C;
}

CovBlocks build_cov_blocks(const KernelParams& p,
                           const Eigen::MatrixXd& Xd,
                           const Eigen::MatrixXd& Xg,
                           const std::vector<int>& grad_dims) {
    CovBlocks cb;
    cb.k_train = assemble_training_cov(p, Xd, Xg, grad_dims);
    cb.layout = StackedLayout{static_cast<int>(Xd.rows()), static_cast<int>(Xg.rows()), grad_dims};
    return cb;
}

RowRef decode_row(const StackedLayout& layout, int row) {
    if (row < 0 || row >= layout.total_rows())
        throw std::invalid_argument("decode_row: row index out of range");
    if (row < layout.n_d) return {0, row};
    const int g = (row - layout.n_d) / layout.n_g;
    return {layout.grad_dims[static_cast<size_t>(g)], (row - layout.n_d) % layout.n_g};
}

Eigen::MatrixXd assemble_rows_cov(const KernelParams& p, const Eigen::MatrixXd& X,
                                  const StackedLayout& layout,
                                  const std::vector<int>& rows_a,
                                  const std::vector<int>& rows_b) {
    if (layout.n_d != X.rows() || (layout.n_g != 0 && layout.n_g != X.rows()))
        throw std::invalid_argument("assemble_rows_cov: layout does not match X");
    p.validate(static_cast<int>(layout.grad_dims.size()));

    std::vector<RowRef> ra(rows_a.size()), rb(rows_b.size());
    for (size_t i = 0; i < rows_a.size(); ++i) ra[i] = decode_row(layout, rows_a[i]);
    for (size_t j = 0; j < rows_b.size(); ++j) rb[j] = decode_row(layout, rows_b[j]);

    // grad_noise is indexed by position within grad_dims, so map back
    auto noise_for = [&](const RowRef& r) {
        if (r.dir == 0) return p.jitter;
        for (size_t g = 0; g < layout.grad_dims.size(); ++g)
            if (layout.grad_dims[g] == r.dir) return p.grad_noise[static_cast<Eigen::Index>(g)];
        return 0.0;
    };

    Eigen::MatrixXd K(rows_a.size(), rows_b.size());
    for (size_t j = 0; j < rb.size(); ++j) {
        for (size_t i = 0; i < ra.size(); ++i) {
            double v = deriv_kernel_eval(p, ra[i].dir, rb[j].dir,
                                         X.row(ra[i].point), X.row(rb[j].point));
            if (rows_a[i] == rows_b[j]) v += noise_for(ra[i]);
            K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    return K;
}

void fill_cross_row(const KernelParams& p, const Eigen::VectorXd& x,
                    const Eigen::MatrixXd& pts, const std::vector<int>& grad_dims,
                    bool with_grads, Eigen::VectorXd& out) {
    const int k = static_cast<int>(pts.rows());
    const int nb = with_grads ? static_cast<int>(grad_dims.size()) : 0;
    const double inv_2l2 = 1.0 / (2.0 * p.length_scale * p.length_scale);
    const double inv_l2 = 2.0 * inv_2l2;
    out.resize(k * (1 + nb));
    for (int j = 0; j < k; ++j) {
        double d2 = 0.0;
        for (int c = 0; c < pts.cols(); ++c) {
            const double diff = x[c] - pts(j, c);
            d2 += diff * diff;
        }
        const double e = p.sigma * std::exp(-d2 * inv_2l2);
        out[j] = e;
        for (int g = 0; g < nb; ++g) {
            const int m = grad_dims[g] - 1;
            out[k + g * k + j] = (x[m] - pts(j, m)) * inv_l2 * e;
        }
    }
}

} // namespace ggps
