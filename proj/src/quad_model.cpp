#include "ggps/quad_model.hpp"

#include <cmath>
#include <stdexcept>

namespace ggps {

QuadParams QuadParams::calibrated(double mass, double g, double l_x, double l_y,
                                  double hover_rpm, double t_z_factor) {
    QuadParams qp;
    qp.mass = mass;
    qp.g = g;
    qp.l_x = l_x;
    qp.l_y = l_y;
    qp.hover_rpm = hover_rpm;
    qp.p_f = -mass * g / (4.0 * hover_rpm * hover_rpm);
    qp.t_z = t_z_factor * std::abs(qp.p_f);
    qp.validate();
    return qp;
}

void QuadParams::validate() const {
    if (!(mass > 0.0) || !(g > 0.0) || !(hover_rpm > 0.0))
        throw std::invalid_argument("QuadParams: mass, g and hover_rpm must be positive");
    if (!(l_x > 0.0) || !(l_y > 0.0))
        throw std::invalid_argument("QuadParams: moment arms must be positive");
    if (!std::isfinite(p_f) || p_f >= 0.0)
        throw std::invalid_argument("QuadParams: p_f must be negative (thrust opposes +z-down)");
    if (!std::isfinite(t_z))
        throw std::invalid_argument("QuadParams: t_z must be finite");
}

BodyWrench body_wrench(const QuadParams& qp, const Eigen::Vector4d& r) {
    for (int i = 0; i < 4; ++i)
        if (!(r[i] >= 0.0) || !std::isfinite(r[i]))
            throw std::invalid_argument("body_wrench: rotor speeds must be non-negative");

    const Eigen::Vector4d r2 = r.array().square();
    BodyWrench w;
    w.force = Eigen::Vector3d(0.0, 0.0, qp.p_f * r2.sum());
    w.torque = Eigen::Vector3d(qp.l_x * qp.p_f * (-r2[0] + r2[1] + r2[2] - r2[3]),
                               qp.l_y * qp.p_f * (-r2[0] - r2[1] + r2[2] + r2[3]),
                               qp.t_z * (-r2[0] + r2[1] + r2[2] - r2[3]));
    return w;
}

Eigen::Matrix3d rotation_zyx(double psi, double theta, double phi) {
    const double cz = std::cos(psi), sz = std::sin(psi);
    const double cy = std::cos(theta), sy = std::sin(theta);
    const double cx = std::cos(phi), sx = std::sin(phi);
    Eigen::Matrix3d R;
    R << cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx,
         sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx,
         -sy,     cy * sx,                cy * cx;
    return R;
}

Eigen::Vector3d euler_zyx_from_matrix(const Eigen::Matrix3d& R) {
    if (!R.allFinite())
        throw std::invalid_argument("euler_zyx_from_matrix: non-finite matrix");
    const Eigen::Matrix3d gram = R.transpose() * R;
    if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6)
        throw std::invalid_argument("euler_zyx_from_matrix: matrix is not orthogonal");

    const double sy = -R(2, 0);
    const double cy = std::sqrt(R(2, 1) * R(2, 1) + R(2, 2) * R(2, 2));
    if (cy < 1e-8) {
        // gimbal: only psi -/+ phi is observable; report phi = 0
        const double theta = (sy > 0.0) ? M_PI / 2.0 : -M_PI / 2.0;
        const double psi = (sy > 0.0) ? std::atan2(R(1, 2), R(1, 1))
                                      : std::atan2(-R(1, 2), R(1, 1));
        return {psi, theta, 0.0};
    }
    return {std::atan2(R(1, 0), R(0, 0)),
            std::atan2(sy, cy),
            std::atan2(R(2, 1), R(2, 2))};
}

namespace {

Eigen::Matrix3d dRz(double psi) {
    const double c = std::cos(psi), s = std::sin(psi);
    Eigen::Matrix3d d;
    d << -s, -c, 0,
          c, -s, 0,
          0,  0, 0;
    return d;
}

Eigen::Matrix3d dRy(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    Eigen::Matrix3d d;
    d << -s, 0,  c,
          0, 0,  0,
         -c, 0, -s;
    return d;
}

Eigen::Matrix3d dRx(double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    Eigen::Matrix3d d;
    d << 0,  0,  0,
         0, -s, -c,
         0,  c, -s;
    return d;
}

Eigen::Matrix3d rz(double a) { return rotation_zyx(a, 0, 0); }
Eigen::Matrix3d ry(double a) { return rotation_zyx(0, a, 0); }
Eigen::Matrix3d rx(double a) { return rotation_zyx(0, 0, a); }

} // namespace

ModelEval eval_model(const QuadParams& qp, const Eigen::Matrix<double, 7, 1>& x_m) {
    if (!x_m.allFinite())
        throw std::invalid_argument("eval_model: non-finite state");
    const Eigen::Vector4d r = x_m.head<4>();
    const double psi = x_m[4], theta = x_m[5], phi = x_m[6];

    const BodyWrench bw = body_wrench(qp, r);
    const Eigen::Matrix3d R = rotation_zyx(psi, theta, phi);

    ModelEval ev;
    ev.wrench.head<3>() = R * bw.force;
    ev.wrench.tail<3>() = R * bw.torque;

    // rotor columns: the body wrench is quadratic in each speed
    for (int n = 0; n < 4; ++n) {
        const double sx = (n == 0 || n == 3) ? -1.0 : 1.0; // sign in tau_x, tau_z patterns
        const double sy2 = (n <= 1) ? -1.0 : 1.0;          // sign in tau_y pattern
        const Eigen::Vector3d dfb(0.0, 0.0, 2.0 * qp.p_f * r[n]);
        const Eigen::Vector3d dtb(qp.l_x * qp.p_f * sx * 2.0 * r[n],
                                  qp.l_y * qp.p_f * sy2 * 2.0 * r[n],
                                  qp.t_z * sx * 2.0 * r[n]);
        ev.jac.col(n).head<3>() = R * dfb;
        ev.jac.col(n).tail<3>() = R * dtb;
    }

    // angle columns: wrench is R(angles) times a fixed body vector
    const Eigen::Matrix3d dR_psi = dRz(psi) * ry(theta) * rx(phi);
    const Eigen::Matrix3d dR_theta = rz(psi) * dRy(theta) * rx(phi);
    const Eigen::Matrix3d dR_phi = rz(psi) * ry(theta) * dRx(phi);
    const Eigen::Matrix3d* dRs[3] = {&dR_psi, &dR_theta, &dR_phi};
    for (int a = 0; a < 3; ++a) {
        ev.jac.col(4 + a).head<3>() = (*dRs[a]) * bw.force;
        ev.jac.col(4 + a).tail<3>() = (*dRs[a]) * bw.torque;
    }
    return ev;
}

} // namespace ggps
