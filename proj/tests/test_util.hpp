#pragma once

// Shared helpers for the unit tests: a self-contained uniform sampler (so
// sequences do not depend on standard-library distribution internals) and a
// couple of tolerance helpers.

#include <Eigen/Dense>
#include <random>

namespace tu {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

inline Eigen::VectorXd rand_vec(std::mt19937_64& rng, int n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(rng, lo, hi);
    return v;
}

inline Eigen::MatrixXd rand_mat(std::mt19937_64& rng, int r, int c, double lo, double hi) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = uniform(rng, lo, hi);
    return m;
}

// Random SPD matrix with controlled conditioning: G*G^T + ridge*I.
inline Eigen::MatrixXd rand_spd(std::mt19937_64& rng, int n, double ridge) {
    Eigen::MatrixXd g = rand_mat(rng, n, n, -1.0, 1.0);
    Eigen::MatrixXd a = g * g.transpose();
    a.diagonal().array() += ridge;
    return a;
}

inline double rel_err(double got, double want, double floor_ = 1e-12) {
    return std::abs(got - want) / std::max(std::abs(want), floor_);
}

} // namespace tu
