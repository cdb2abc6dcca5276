#pragma once

#include <Eigen/Dense>

// Analytic quadrotor force/torque model and ZYX Euler utilities.
//
// Frame convention: world +z points downward, so hover thrust is a negative
// z force and the thrust coefficient p_f is negative. The model state is
// x_M = (r1, r2, r3, r4, psi, theta, phi) with rotor speeds in rpm and
// angles in radians; airspeed does not enter the simple model.

namespace ggps {

struct QuadParams {
    double mass = 2.6;       // kg
    double g = 9.81;         // m/s^2
    double l_x = 0.2;        // roll moment arm, m
    double l_y = 0.2;        // pitch moment arm, m
    double hover_rpm = 3500; // per-rotor speed that exactly cancels gravity
    double p_f = 0.0;        // thrust per rpm^2 (negative: thrust pushes -z)
    double t_z = 0.0;        // yaw torque per rpm^2

    // Calibrates p_f so four rotors at hover_rpm cancel gravity exactly:
    // p_f = -mass*g / (4*hover_rpm^2), and sets t_z = t_z_factor*|p_f|.
    static QuadParams calibrated(double mass, double g, double l_x, double l_y,
                                 double hover_rpm, double t_z_factor);

    void validate() const; // throws std::invalid_argument
};

struct BodyWrench {
    Eigen::Vector3d force;
    Eigen::Vector3d torque;
};

// Rotor-speed quadratics in the body frame:
//   f_b   = (0, 0, p_f*(r1^2+r2^2+r3^2+r4^2))
//   tau_b = (l_x*p_f*(-r1^2+r2^2+r3^2-r4^2),
//            l_y*p_f*(-r1^2-r2^2+r3^2+r4^2),
//            t_z   *(-r1^2+r2^2+r3^2-r4^2))
// Throws std::invalid_argument on negative or non-finite rotor speeds.
BodyWrench body_wrench(const QuadParams& qp, const Eigen::Vector4d& rotor_rpm);

// R = Rz(psi) * Ry(theta) * Rx(phi).
Eigen::Matrix3d rotation_zyx(double psi, double theta, double phi);

// Inverse of rotation_zyx for proper rotations; tolerates improper inputs
// (det -1) by extracting the same angle formulas without a determinant check.
// Requires orthogonality: max|R^T R - I| <= 1e-6, else std::invalid_argument.
// Near the gimbal singularity (|cos theta| < 1e-8) phi is set to zero and the
// remaining rotation folds into psi. Returns (psi, theta, phi).
Eigen::Vector3d euler_zyx_from_matrix(const Eigen::Matrix3d& R);

struct ModelEval {
    Eigen::Matrix<double, 6, 1> wrench;  // world-frame force (3) then torque (3)
    Eigen::Matrix<double, 6, 7> jac;     // d wrench / d (r1..r4, psi, theta, phi)
};

// World-frame wrench [R*f_b; R*tau_b] and its analytic Jacobian.
ModelEval eval_model(const QuadParams& qp, const Eigen::Matrix<double, 7, 1>& x_m);

} // namespace ggps
