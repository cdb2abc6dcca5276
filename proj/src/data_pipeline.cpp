#include "ggps/data_pipeline.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ggps {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg = kPi / 180.0;

// synth-v2 constants, frozen; see docs/synthetic_oracle.md
constexpr double kDragCoeff = 0.055;    // quadratic drag against aligned +x
constexpr double kAreaTheta = 0.35;     // frontal-area growth with pitch
constexpr double kAreaPhi = 0.20;       // frontal-area growth with roll
constexpr double kDragZ = 0.018;        // vertical drag coupling
constexpr double kForceX = 0.06;        // rotor-interaction force terms
constexpr double kForceY = 0.06;
constexpr double kForceZ = 0.04;
constexpr double kTorqueXY = 0.08;      // rotor-interaction torque terms
constexpr double kTorqueZ = 0.05;
constexpr double kTorqueAirMix = 0.5;   // airspeed factor on torque terms
constexpr double kKilo = 1.0 / 1000.0;  // rpm -> kilorpm argument scaling
constexpr double kHoverKrpm = 3.5;      // noise reference, kilorpm
constexpr double kNoiseBaseGain = 20.0; // dB per decade of the kinetic term

// sinusoid phase rates, rad per kilorpm; picked so every interaction term's
// steepest directional frequency lands near 1.75 rad per normalized input
// unit: 0.5 * 3.5 for one rotor, 0.35 * 3.5 * sqrt(2) for a pair sum, and
// 0.25 * 3.5 * 2 for the four-rotor alternation
constexpr double kArgSingle = 0.5;
constexpr double kArgPair = 0.35;
constexpr double kArgQuad = 0.25;

double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace

SampleBounds SampleBounds::flight_envelope() {
    SampleBounds b;
    b.lo.resize(8);
    b.hi.resize(8);
    b.lo << 0, 0, 0, 0, -90 * kDeg, -60 * kDeg, -90 * kDeg, 0;
    b.hi << 7000, 7000, 7000, 7000, 90 * kDeg, 60 * kDeg, 90 * kDeg, 20;
    return b;
}

void SampleBounds::validate() const {
    if (lo.size() != kStateDim || hi.size() != kStateDim)
        throw std::invalid_argument("bounds must cover all 8 state dimensions");
    for (int i = 0; i < kStateDim; ++i)
        if (!(hi[i] > lo[i])) {
            std::ostringstream os;
            os << "bounds: max must exceed min in dimension " << i;
            throw std::invalid_argument(os.str());
        }
}

Eigen::MatrixXd lhc_sample(int n, std::uint64_t seed, const SampleBounds& bounds) {
    if (n < 1) throw std::invalid_argument("lhc_sample: n must be positive");
    bounds.validate();
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd X(n, kStateDim);
    std::vector<int> perm(static_cast<size_t>(n));
    for (int c = 0; c < kStateDim; ++c) {
        for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
        for (int i = n - 1; i > 0; --i)
            std::swap(perm[static_cast<size_t>(i)],
                      perm[static_cast<size_t>(rng() % static_cast<std::uint64_t>(i + 1))]);
        const double w = (bounds.hi[c] - bounds.lo[c]) / n;
        for (int i = 0; i < n; ++i)
            X(i, c) = bounds.lo[c] + (perm[static_cast<size_t>(i)] + unit_uniform(rng)) * w;
    }
    return X;
}

OracleResult synthetic_oracle(const Eigen::Matrix<double, 8, 1>& x, const QuadParams& qp) {
    if (!x.allFinite()) throw std::invalid_argument("synthetic_oracle: non-finite state");
    OracleResult out;
    out.jac.setZero();

    const double psi = x[4], theta = x[5], phi = x[6], v = x[7];
    const double s1 = x[0] * kKilo, s2 = x[1] * kKilo, s3 = x[2] * kKilo, s4 = x[3] * kKilo;

    ModelEval model = eval_model(qp, x.head<7>());
    out.y_aero = model.wrench;
    out.jac.topRows<6>() = model.jac;

    // quadratic drag along the aligned -x axis, frontal area grows with tilt
    const double st = std::sin(theta), ct = std::cos(theta);
    const double sp = std::sin(phi), cp = std::cos(phi);
    const double area = 1.0 + kAreaTheta * st * st + kAreaPhi * sp * sp;
    out.y_aero[0] += -kDragCoeff * area * v * v;
    out.jac(0, 5) += -kDragCoeff * v * v * kAreaTheta * 2.0 * st * ct;
    out.jac(0, 6) += -kDragCoeff * v * v * kAreaPhi * 2.0 * sp * cp;
    out.y_aero[2] += kDragZ * v * v * st * cp;
    out.jac(2, 5) += kDragZ * v * v * ct * cp;
    out.jac(2, 6) += -kDragZ * v * v * st * sp;

    // bounded rotor-interaction perturbations (all vanish at equal rotors)
    const double p1 = kArgSingle * s1, p2 = kArgSingle * s2;
    const double p3 = kArgSingle * s3, p4 = kArgSingle * s4;
    const double dks = kArgSingle * kKilo; // d p_n / d rpm_n

    const double fx_mix = 1.0 + 0.25 * ct;
    out.y_aero[0] += kForceX * (std::sin(p1) + std::sin(p3) - std::sin(p2) - std::sin(p4)) * fx_mix;
    out.jac(0, 0) += kForceX * std::cos(p1) * dks * fx_mix;
    out.jac(0, 2) += kForceX * std::cos(p3) * dks * fx_mix;
    out.jac(0, 1) += -kForceX * std::cos(p2) * dks * fx_mix;
    out.jac(0, 3) += -kForceX * std::cos(p4) * dks * fx_mix;
    out.jac(0, 5) += kForceX * (std::sin(p1) + std::sin(p3) - std::sin(p2) - std::sin(p4)) *
                     (-0.25 * st);

    const double fy_mix = 1.0 + 0.3 * sp;
    const double q14 = kArgPair * (s1 + s4), q23 = kArgPair * (s2 + s3);
    const double dkp = kArgPair * kKilo;
    const double fy_core = std::sin(q14) - std::sin(q23);
    out.y_aero[1] += kForceY * fy_core * fy_mix;
    out.jac(1, 0) += kForceY * std::cos(q14) * dkp * fy_mix;
    out.jac(1, 3) += kForceY * std::cos(q14) * dkp * fy_mix;
    out.jac(1, 1) += -kForceY * std::cos(q23) * dkp * fy_mix;
    out.jac(1, 2) += -kForceY * std::cos(q23) * dkp * fy_mix;
    out.jac(1, 6) += kForceY * fy_core * 0.3 * cp;

    out.y_aero[2] += kForceZ * (std::cos(p1) + std::cos(p2) - std::cos(p3) - std::cos(p4));
    out.jac(2, 0) += -kForceZ * std::sin(p1) * dks;
    out.jac(2, 1) += -kForceZ * std::sin(p2) * dks;
    out.jac(2, 2) += kForceZ * std::sin(p3) * dks;
    out.jac(2, 3) += kForceZ * std::sin(p4) * dks;

    const double air_mix = 1.0 + kTorqueAirMix * v / 20.0;
    out.y_aero[3] += kTorqueXY * (std::sin(p1) - std::sin(p3)) * air_mix;
    out.jac(3, 0) += kTorqueXY * std::cos(p1) * dks * air_mix;
    out.jac(3, 2) += -kTorqueXY * std::cos(p3) * dks * air_mix;
    out.y_aero[4] += kTorqueXY * (std::sin(p2) - std::sin(p4)) * air_mix;
    out.jac(4, 1) += kTorqueXY * std::cos(p2) * dks * air_mix;
    out.jac(4, 3) += -kTorqueXY * std::cos(p4) * dks * air_mix;

    const double zarg = kArgQuad * (s1 - s2 + s3 - s4);
    const double dkq = kArgQuad * kKilo;
    out.y_aero[5] += kTorqueZ * std::sin(zarg);
    out.jac(5, 0) += kTorqueZ * std::cos(zarg) * dkq;
    out.jac(5, 1) += -kTorqueZ * std::cos(zarg) * dkq;
    out.jac(5, 2) += kTorqueZ * std::cos(zarg) * dkq;
    out.jac(5, 3) += -kTorqueZ * std::cos(zarg) * dkq;

    // sound levels: log law in the total rotor kinetic term plus directional
    // and airspeed terms; floor values at zero rotor speed
    const double ek = s1 * s1 + s2 * s2 + s3 * s3 + s4 * s4;
    const double rh2 = kHoverKrpm * kHoverKrpm;
    const double base = kNoiseBaseGain * std::log10(1.0 + ek / rh2);
    // d base / d r_n, folding in the kilorpm scaling of s_n
    const double dbase_pref =
        kNoiseBaseGain / std::log(10.0) * 2.0 * kKilo / (rh2 + ek);
    const double dbase[4] = {dbase_pref * s1, dbase_pref * s2, dbase_pref * s3, dbase_pref * s4};

    const double m0 = 1.0 + 0.10 * st * std::cos(psi);
    out.y_noise[0] = 40.0 + base * m0 + 0.15 * v;
    for (int r = 0; r < 4; ++r) out.jac(6, r) = dbase[r] * m0;
    out.jac(6, 4) = base * 0.10 * st * -std::sin(psi);
    out.jac(6, 5) = base * 0.10 * ct * std::cos(psi);

    const double m1 = 1.0 + 0.12 * sp;
    out.y_noise[1] = 38.0 + base * m1 + 0.10 * v * ct;
    for (int r = 0; r < 4; ++r) out.jac(7, r) = dbase[r] * m1;
    out.jac(7, 5) = -0.10 * v * st;
    out.jac(7, 6) = base * 0.12 * cp;

    const double m2 = 1.0 - 0.08 * std::sin(theta + phi);
    out.y_noise[2] = 42.0 + base * m2 + 0.05 * v;
    for (int r = 0; r < 4; ++r) out.jac(8, r) = dbase[r] * m2;
    out.jac(8, 5) = base * -0.08 * std::cos(theta + phi);
    out.jac(8, 6) = base * -0.08 * std::cos(theta + phi);

    return out;
}

Eigen::Matrix<double, 9, 7> finite_diff_gradients(
    const Eigen::Matrix<double, 8, 1>& x,
    const std::function<Eigen::Matrix<double, 9, 1>(const Eigen::Matrix<double, 8, 1>&)>& f) {
    Eigen::Matrix<double, 9, 7> j;
    const Eigen::Matrix<double, 9, 1> y0 = f(x);
    for (int c = 0; c < kGradCols; ++c) {
        const double h = c < 4 ? (x[c] > 0.0 ? 0.1 * x[c] : 1.0) : kDeg;
        Eigen::Matrix<double, 8, 1> xp = x;
        xp[c] += h;
        j.col(c) = (f(xp) - y0) / h;
    }
    return j;
}

std::vector<RawCase> generate_dataset(int n, std::uint64_t seed, const SampleBounds& bounds,
                                      const QuadParams& qp, GradientMode mode) {
    qp.validate();
    Eigen::MatrixXd X = lhc_sample(n, seed, bounds);
    std::vector<RawCase> cases(static_cast<size_t>(n));
    auto stacked = [&](const Eigen::Matrix<double, 8, 1>& xs) {
        auto r = synthetic_oracle(xs, qp);
        Eigen::Matrix<double, 9, 1> y;
        y << r.y_aero, r.y_noise;
        return y;
    };
    for (int i = 0; i < n; ++i) {
        RawCase& c = cases[static_cast<size_t>(i)];
        c.x = X.row(i);
        auto r = synthetic_oracle(c.x, qp);
        c.y_aero = r.y_aero;
        c.y_noise = r.y_noise;
        Eigen::Matrix<double, 9, 7> j =
            mode == GradientMode::analytic ? r.jac : finite_diff_gradients(c.x, stacked);
        c.j_aero = j.topRows<6>();
        c.j_noise = j.bottomRows<3>();
    }
    return cases;
}

void residualize(const RawCase& c, const QuadParams& qp, Eigen::Matrix<double, 9, 1>& y,
                 Eigen::Matrix<double, 9, 7>& j) {
    ModelEval model = eval_model(qp, c.x.head<7>());
    y.head<6>() = c.y_aero - model.wrench;
    y.tail<3>() = c.y_noise;
    j.topRows<6>() = c.j_aero - model.jac;
    j.bottomRows<3>() = c.j_noise;
}

TrainingSet normalize_dataset(const std::vector<RawCase>& cases, const QuadParams& qp,
                              double grad_noise_scale) {
    const int n = static_cast<int>(cases.size());
    if (n < 2) throw std::invalid_argument("normalize_dataset: need at least 2 cases");
    if (!(grad_noise_scale >= 0.0))
        throw std::invalid_argument("normalize_dataset: grad_noise_scale must be >= 0");

    Eigen::MatrixXd X(n, kStateDim);
    Eigen::MatrixXd Y(n, kOutputDim);
    std::vector<Eigen::Matrix<double, 9, 7>> J(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        X.row(i) = cases[static_cast<size_t>(i)].x;
        Eigen::Matrix<double, 9, 1> y;
        residualize(cases[static_cast<size_t>(i)], qp, y, J[static_cast<size_t>(i)]);
        Y.row(i) = y;
    }

    TrainingSet ts;
    ts.stats.x_min = X.colwise().minCoeff();
    ts.stats.x_max = X.colwise().maxCoeff();
    for (int c = 0; c < kStateDim; ++c)
        if (ts.stats.x_max[c] - ts.stats.x_min[c] < 1e-12) {
            std::ostringstream os;
            os << "normalize_dataset: input column " << c << " is constant";
            throw std::invalid_argument(os.str());
        }
    ts.stats.half_range = (ts.stats.x_max - ts.stats.x_min) / 2.0;
    ts.stats.y_mean = Y.colwise().mean().transpose();
    ts.stats.y_var.resize(kOutputDim);
    for (int k = 0; k < kOutputDim; ++k) {
        ts.stats.y_var[k] =
            (Y.col(k).array() - ts.stats.y_mean[k]).square().sum() / n;
        if (!(ts.stats.y_var[k] > 0.0)) {
            std::ostringstream os;
            os << "normalize_dataset: output column " << k << " has zero variance";
            throw std::invalid_argument(os.str());
        }
    }

    ts.X_tilde.resize(n, kStateDim);
    for (int c = 0; c < kStateDim; ++c)
        ts.X_tilde.col(c) =
            ((X.col(c).array() - ts.stats.x_min[c]) / ts.stats.half_range[c] - 1.0).matrix();
    const Eigen::VectorXd y_sd = ts.stats.y_var.cwiseSqrt();
    ts.Y_tilde.resize(n, kOutputDim);
    for (int k = 0; k < kOutputDim; ++k)
        ts.Y_tilde.col(k) = ((Y.col(k).array() - ts.stats.y_mean[k]) / y_sd[k]).matrix();

    ts.grad_dims.resize(kGradCols);
    for (int g = 0; g < kGradCols; ++g) ts.grad_dims[static_cast<size_t>(g)] = g + 1;
    ts.layout = StackedLayout{n, n, ts.grad_dims};

    // normalized gradients: d y~ / d x~ = (d y / d x_j) * half_range[j] / sd[k]
    ts.Y_rows.resize(ts.layout.total_rows(), kOutputDim);
    ts.Y_rows.topRows(n) = ts.Y_tilde;
    ts.lambda2 = Eigen::VectorXd::Zero(kGradCols);
    for (int g = 0; g < kGradCols; ++g) {
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < kOutputDim; ++k) {
                const double gv =
                    J[static_cast<size_t>(i)](k, g) * ts.stats.half_range[g] / y_sd[k];
                ts.Y_rows(ts.layout.grad_row(g, i), k) = gv;
                sum += gv;
                sum2 += gv * gv;
            }
        }
        const double cnt = static_cast<double>(n) * kOutputDim;
        const double mean = sum / cnt;
        ts.lambda2[g] = grad_noise_scale * (sum2 / cnt - mean * mean);
    }
    return ts;
}

Eigen::VectorXd normalize_input(const Eigen::VectorXd& x, const NormStats& stats) {
    return ((x - stats.x_min).array() / stats.half_range.array() - 1.0).matrix();
}

void denormalize_prediction(const Eigen::VectorXd& mean_tilde, const Eigen::VectorXd& var_tilde,
                            const NormStats& stats, Eigen::VectorXd& mean, Eigen::VectorXd& var) {
    mean = (mean_tilde.array() * stats.y_var.cwiseSqrt().array() + stats.y_mean.array()).matrix();
    var = (var_tilde.array() * stats.y_var.array()).matrix();
}

} // namespace ggps
