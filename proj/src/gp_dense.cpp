#include "ggps/gp_dense.hpp"

#include <sstream>
#include <stdexcept>

#include "ggps/errors.hpp"

namespace ggps {

DenseGPModel fit_dense(const KernelParams& p,
                       const Eigen::MatrixXd& Xd,
                       const Eigen::MatrixXd& Xg,
                       const std::vector<int>& grad_dims,
                       const Eigen::MatrixXd& Y) {
    CovBlocks cb = build_cov_blocks(p, Xd, Xg, grad_dims);
    if (Y.rows() != cb.layout.total_rows())
        throw std::invalid_argument("fit_dense: Y rows do not match the stacked layout");
    if (!Y.allFinite())
        throw std::invalid_argument("fit_dense: non-finite observations");

    DenseGPModel m;
    m.params = p;
    m.layout = cb.layout;
    m.Xd = Xd;
    m.Xg = Xg;
    m.chol.compute(cb.k_train);
    if (m.chol.info() != Eigen::Success) {
        // LLT bails without exposing the pivot; LDLT's diagonal names it
        Eigen::LDLT<Eigen::MatrixXd> ldlt(cb.k_train);
        std::ostringstream msg;
        msg << "fit_dense: covariance factorization failed, min pivot = "
            << ldlt.vectorD().minCoeff();
        throw NumericalError(msg.str());
    }
    m.alpha = m.chol.solve(Y);
    return m;
}

namespace {

GPPrediction predict_impl(const DenseGPModel& m, const Eigen::MatrixXd& Xq) {
    const Eigen::MatrixXd cross =
        assemble_query_cross(m.params, Xq, m.Xd, m.Xg, m.layout.grad_dims);

    GPPrediction out;
    out.mean = cross * m.alpha;

    const Eigen::MatrixXd v = m.chol.solve(cross.transpose());
    out.var.resize(Xq.rows());
    for (Eigen::Index q = 0; q < Xq.rows(); ++q) {
        double var = m.params.sigma - cross.row(q).dot(v.col(q));
        if (var < -1e-10)
            throw NumericalError("predict: negative variance beyond roundoff tolerance");
        out.var[q] = var < 0.0 ? 0.0 : var;
    }
    return out;
}

} // namespace

GPPrediction predict_standard(const DenseGPModel& m, const Eigen::MatrixXd& Xq) {
    if (m.layout.n_g != 0)
        throw std::invalid_argument("predict_standard: model carries gradient rows");
    return predict_impl(m, Xq);
}

GPPrediction predict_with_gradients(const DenseGPModel& m, const Eigen::MatrixXd& Xq) {
    return predict_impl(m, Xq);
}

} // namespace ggps
