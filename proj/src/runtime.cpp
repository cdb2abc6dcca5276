#include "ggps/runtime.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "ggps/data_pipeline.hpp"
#include "ggps/gp_dense.hpp"
#include "ggps/partition.hpp"
#include "ggps/quad_model.hpp"

namespace ggps {

Eigen::Matrix3d householder_align(const Eigen::Vector3d& v) {
    const double norm = v.norm();
    if (norm < 1e-9) return Eigen::Matrix3d::Identity();

    const Eigen::Vector3d vhat = v / norm;
    Eigen::Vector3d w = vhat - Eigen::Vector3d::UnitX();
    const double wn = w.norm();
    if (wn < 1e-9) return Eigen::Matrix3d::Identity();
    w /= wn;
    return Eigen::Matrix3d::Identity() - 2.0 * w * w.transpose();
}

SurrogateModel SurrogateModel::load(const std::string& path) {
    SurrogateModel m;
    load_artifact_stream(path, m.meta_, [&m](ArtifactBin&& bin) {
        RtBin rb;
        const int n_near = static_cast<int>(bin.near_pts.rows());
        const int rows_per_pt = 1 + static_cast<int>(m.meta_.grad_dims.size());
        if (bin.S_inv.rows() != static_cast<Eigen::Index>(n_near) * rows_per_pt) {
            throw std::runtime_error("artifact bin " + std::to_string(bin.id) +
                                     ": inverse size does not match near set");
        }
        rb.id = bin.id;
        rb.near_pts = std::move(bin.near_pts);
        rb.S_var = bin.S_inv.cast<float>();
        rb.W = std::move(bin.W);
        m.bins_.push_back(std::move(rb));
    });
    if (m.meta_.stats.x_min.size() != kStateDim) {
        throw std::runtime_error("artifact normalization stats do not cover the 8-dim state");
    }
    return m;
}

Eigen::Matrix<double, 8, 1> SurrogateModel::aligned_state(const WorldQuery& q,
                                                          Eigen::Matrix3d* H_out,
                                                          double* det_out) const {
    if (!q.rotor_rpm.allFinite() || !q.v_world.allFinite() ||
        !std::isfinite(q.psi) || !std::isfinite(q.theta) || !std::isfinite(q.phi)) {
        throw std::invalid_argument("query: non-finite field");
    }
    if (q.rotor_rpm.minCoeff() < 0.0) {
        throw std::invalid_argument("query: negative rotor speed");
    }

    const Eigen::Matrix3d H = householder_align(q.v_world);
    const Eigen::Matrix3d R_WB = rotation_zyx(q.psi, q.theta, q.phi);
    // H is symmetric, so this is H^T * R_WB: the attitude seen from the frame
    // whose +x axis carries the airspeed.
    const Eigen::Matrix3d R_HB = H * R_WB;
    const Eigen::Vector3d ang = euler_zyx_from_matrix(R_HB);

    Eigen::Matrix<double, 8, 1> x;
    x.head<4>() = q.rotor_rpm;
    x[4] = ang[0];
    x[5] = ang[1];
    x[6] = ang[2];
    x[7] = q.v_world.norm();

    if (H_out) *H_out = H;
    if (det_out) *det_out = R_HB.determinant();
    return x;
}

Prediction SurrogateModel::query(const WorldQuery& q) const {
    Eigen::Matrix3d H;
    double det = 1.0;
    const Eigen::Matrix<double, 8, 1> x = aligned_state(q, &H, &det);

    const auto t0 = std::chrono::steady_clock::now();

    bool outside = false;
    for (int c = 0; c < kStateDim; ++c) {
        if (x[c] < meta_.stats.x_min[c] || x[c] > meta_.stats.x_max[c]) outside = true;
    }

    const Eigen::VectorXd xt = normalize_input(x, meta_.stats);
    const int bin_id = locate_bin(xt, meta_.centroids);
    const RtBin& bin = bins_[static_cast<size_t>(bin_id)];

    const Eigen::MatrixXd k_row = assemble_query_cross(
        meta_.kernel, xt.transpose(), bin.near_pts, bin.near_pts, meta_.grad_dims);

    Eigen::VectorXd mean_tilde = (k_row * bin.W).transpose();

    const Eigen::VectorXf k_f = k_row.transpose().cast<float>();
    const float quad = k_f.dot(bin.S_var.selfadjointView<Eigen::Lower>() * k_f);
    const double var_tilde =
        std::max(meta_.kernel.sigma - static_cast<double>(quad), 0.0);

    Eigen::VectorXd mean, var;
    denormalize_prediction(mean_tilde,
                           Eigen::VectorXd::Constant(kOutputDim, var_tilde),
                           meta_.stats, mean, var);

    const auto t1 = std::chrono::steady_clock::now();

    const BodyWrench base = body_wrench(meta_.quad, q.rotor_rpm);
    const Eigen::Matrix3d R_WB = rotation_zyx(q.psi, q.theta, q.phi);

    Prediction out;
    out.mean.segment<3>(0) = H * mean.segment<3>(0) + R_WB * base.force;
    out.mean.segment<3>(3) = H * mean.segment<3>(3) + R_WB * base.torque;
    out.mean.segment<3>(6) = mean.segment<3>(6);
    out.std = var.cwiseMax(0.0).cwiseSqrt();
    out.bin_id = bin_id;
    out.latency_ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
    out.extrapolation = outside;
    out.det_aligned = det;
    return out;
}

} // namespace ggps
