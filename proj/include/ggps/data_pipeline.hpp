#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ggps/kernel.hpp"
#include "ggps/quad_model.hpp"

// Training-data production: Latin hypercube sampling over the flight envelope,
// a frozen synthetic stand-in for the high-fidelity aerodynamic solver,
// finite-difference gradients, residualization against the analytic model,
// and the normalization that puts everything on the GP's [-1,1] / z-scored
// scale. The case state is x = (r1..r4, psi, theta, phi, v) with angles in
// radians and v the airspeed magnitude along the aligned +x axis.

namespace ggps {

inline constexpr int kStateDim = 8;
inline constexpr int kOutputDim = 9;   // force(3), torque(3), sound levels(3)
inline constexpr int kGradCols = 7;    // no airspeed column
inline constexpr const char* kOracleVersion = "synth-v2";

struct SampleBounds {
    Eigen::VectorXd lo;   // size 8
    Eigen::VectorXd hi;

    // rotor rpm [0,7000], yaw +-90 deg, pitch +-60 deg, roll +-90 deg
    // (stored in radians), airspeed [0,20] m/s
    static SampleBounds flight_envelope();
    void validate() const;   // hi > lo elementwise, size 8
};

// Latin hypercube design: each column hits each of the n equal strata exactly
// once; deterministic per seed.
Eigen::MatrixXd lhc_sample(int n, std::uint64_t seed, const SampleBounds& bounds);

struct OracleResult {
    Eigen::Matrix<double, 6, 1> y_aero;
    Eigen::Vector3d y_noise;
    Eigen::Matrix<double, 9, 7> jac;   // closed-form gradients, no airspeed column
};

// Fixed smooth stand-in for the aerodynamic/acoustic solver chain: the
// analytic model wrench plus quadratic drag with attitude-dependent frontal
// area, bounded sinusoidal rotor-interaction perturbations, and a log-law
// sound level with directional terms. Formula and constants are frozen as
// synth-v2 and written out in docs/synthetic_oracle.md; tests and accuracy
// comparisons depend on them not changing.
OracleResult synthetic_oracle(const Eigen::Matrix<double, 8, 1>& x, const QuadParams& qp);

// One-sided finite differences of a 9-output function: rotor speeds stepped
// by +10% (absolute 1 rpm step at zero), angles by +1 degree.
Eigen::Matrix<double, 9, 7> finite_diff_gradients(
    const Eigen::Matrix<double, 8, 1>& x,
    const std::function<Eigen::Matrix<double, 9, 1>(const Eigen::Matrix<double, 8, 1>&)>& f);

struct RawCase {
    Eigen::Matrix<double, 8, 1> x;
    Eigen::Matrix<double, 6, 1> y_aero;
    Eigen::Matrix<double, 6, 7> j_aero;
    Eigen::Vector3d y_noise;
    Eigen::Matrix<double, 3, 7> j_noise;
};

enum class GradientMode { fd, analytic };

// LHC-samples n cases and evaluates the oracle at each; gradients come from
// one-sided finite differences (the production route) or the oracle's closed
// form.
std::vector<RawCase> generate_dataset(int n, std::uint64_t seed, const SampleBounds& bounds,
                                      const QuadParams& qp,
                                      GradientMode mode = GradientMode::fd);

// Residual targets: aero outputs minus the analytic model (values and
// gradients alike); sound levels pass through untouched.
void residualize(const RawCase& c, const QuadParams& qp, Eigen::Matrix<double, 9, 1>& y,
                 Eigen::Matrix<double, 9, 7>& j);

struct NormStats {
    Eigen::VectorXd x_min, x_max;   // 8
    Eigen::VectorXd y_mean, y_var;  // 9
    Eigen::VectorXd half_range;     // 8, (x_max - x_min)/2
};

struct TrainingSet {
    Eigen::MatrixXd X_tilde;   // n x 8, min-max mapped to [-1,1]
    Eigen::MatrixXd Y_tilde;   // n x 9, z-scored residuals
    Eigen::MatrixXd Y_rows;    // stacked (8n) x 9: value rows then one block
                               // per gradient dimension, normalized
    NormStats stats;
    Eigen::VectorXd lambda2;   // 7, gradient noise variances (0.3 * grad variance)
    std::vector<int> grad_dims;   // 1..7
    StackedLayout layout;
};

// Residualizes, min-max normalizes inputs, z-scores outputs, rescales
// gradients by half_range[j]/sqrt(y_var[k]), and derives lambda2 as
// grad_noise_scale times the per-dimension variance of the normalized
// gradients. Throws std::invalid_argument on n < 2, a constant input column
// (named), or a negative scale.
TrainingSet normalize_dataset(const std::vector<RawCase>& cases, const QuadParams& qp,
                              double grad_noise_scale = 0.3);

// Forward transforms for query-time use.
Eigen::VectorXd normalize_input(const Eigen::VectorXd& x, const NormStats& stats);
void denormalize_prediction(const Eigen::VectorXd& mean_tilde, const Eigen::VectorXd& var_tilde,
                            const NormStats& stats, Eigen::VectorXd& mean, Eigen::VectorXd& var);

} // namespace ggps
