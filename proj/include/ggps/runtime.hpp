#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ggps/artifact.hpp"

// Real-time query path. A world-frame query (rotor speeds, ZYX attitude,
// airspeed vector) is rewritten into the surrogate's training frame: a
// Householder reflection H maps the airspeed direction onto +x, the aligned
// attitude H * R_WB is reduced to ZYX Euler angles, and the GP then predicts
// the residual wrench in that frame. Recomposition applies H (symmetric, its
// own inverse) to the residual force/torque and adds the analytic model
// wrench at the world attitude; sound levels are frame-free scalars.
//
// H is a reflection (det -1), so the aligned attitude is improper whenever
// the airspeed is not already along +x; the Euler extraction tolerates that,
// and the determinant is attached to every Prediction (det_aligned) so
// callers can audit mirror-ambiguous queries.

namespace ggps {

// Reflection mapping v/||v|| onto e_x: symmetric, involutory, det -1.
// Degenerate inputs fall back to the identity: ||v|| < 1e-9 (no meaningful
// airspeed direction) or v already within 1e-9 of +x after normalization.
Eigen::Matrix3d householder_align(const Eigen::Vector3d& v);

struct WorldQuery {
    Eigen::Vector4d rotor_rpm;
    double psi = 0.0;   // world-frame ZYX attitude, radians
    double theta = 0.0;
    double phi = 0.0;
    Eigen::Vector3d v_world = Eigen::Vector3d::Zero(); // airspeed vector, m/s
};

struct Prediction {
    Eigen::Matrix<double, 9, 1> mean; // world force (3), world torque (3), sound dB (3)
    Eigen::Matrix<double, 9, 1> std;  // per-output predictive standard deviation; the
                                      // GP variance is one shared scalar, scaled by each
                                      // output's training spread (not rotated)
    int bin_id = 0;
    std::int64_t latency_ns = 0;      // state build through denormalization; excludes
                                      // the frame algebra on either side
    bool extrapolation = false;       // aligned state left the training bounding box
    double det_aligned = 1.0;         // det(H * R_WB), -1 on mirror-ambiguous queries
};

class SurrogateModel {
  public:
    // Streams the artifact: per bin, the corrected inverse is converted to a
    // float32 mirror used only for the variance quadratic form; the mean path
    // (W and the kernel row) stays in double.
    static SurrogateModel load(const std::string& path);

    // Validates the query (finite, rotor speeds nonnegative), never returns
    // partial output, and is bit-deterministic for a fixed model and query.
    Prediction query(const WorldQuery& q) const;

    // The aligned training-frame state (r1..r4, psi, theta, phi, v) for a
    // world query, plus optionally the reflection used and the composed
    // determinant. Exposed so tests can drive the frame logic directly.
    Eigen::Matrix<double, 8, 1> aligned_state(const WorldQuery& q,
                                              Eigen::Matrix3d* H_out = nullptr,
                                              double* det_out = nullptr) const;

    const ArtifactMeta& meta() const { return meta_; }
    int n_bins() const { return static_cast<int>(bins_.size()); }
    int near_rows(int bin) const { return static_cast<int>(bins_[static_cast<size_t>(bin)].W.rows()); }

  private:
    SurrogateModel() = default;

    struct RtBin {
        int id = 0;
        Eigen::MatrixXd near_pts; // n_near x 8, normalized
        Eigen::MatrixXf S_var;    // float32 mirror of S_inv, variance only
        Eigen::MatrixXd W;        // near rows x 9
    };

    ArtifactMeta meta_;
    std::vector<RtBin> bins_;
};

} // namespace ggps
