#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "ggps/artifact.hpp"
#include "ggps/runtime.hpp"
#include "ggps/partition.hpp"
#include "test_util.hpp"

using namespace ggps;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

const QuadParams kQuad = QuadParams::calibrated(2.6, 9.81, 0.2, 0.2, 3500.0, 0.01);

struct SmallModel {
    std::vector<RawCase> cases;
    TrainingSet ts;
    KernelParams p;
    std::vector<BinSpec> bins;
    std::vector<BinPrecomp> pre;
    ArtifactMeta meta;
};

SmallModel make_model(int n, int n_bins, double eps, std::uint64_t seed,
                      bool with_schur = true) {
    SmallModel m;
    auto b = SampleBounds::flight_envelope();
    m.cases = generate_dataset(n, seed, b, kQuad, GradientMode::analytic);
    m.ts = normalize_dataset(m.cases, kQuad);
    m.p.grad_noise = m.ts.lambda2;

    PartitionConfig pc;
    pc.n_bins = n_bins;
    pc.eps = eps;
    pc.seed = seed;
    m.bins = build_bins(m.ts.X_tilde, pc);
    classify_all_bins(m.bins, m.ts.X_tilde, m.p, eps, m.ts.layout);

    PrecompOptions opt;
    opt.mode = SolverMode::direct;
    opt.with_schur = with_schur;
    for (const auto& bin : m.bins)
        m.pre.push_back(precompute_bin(bin, m.p, m.ts.X_tilde, m.ts.grad_dims, m.ts.Y_rows, opt));

    m.meta.kernel = m.p;
    m.meta.grad_dims = m.ts.grad_dims;
    m.meta.with_schur = with_schur;
    m.meta.eps = eps;
    m.meta.seed = seed;
    m.meta.n_train = n;
    m.meta.oracle_version = kOracleVersion;
    m.meta.stats = m.ts.stats;
    m.meta.quad = kQuad;
    m.meta.centroids.resize(n_bins, kStateDim);
    for (const auto& bin : m.bins) m.meta.centroids.row(bin.id) = bin.centroid;
    return m;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

WorldQuery query_from_state(const Eigen::Matrix<double, 8, 1>& x) {
    WorldQuery q;
    q.rotor_rpm = x.head<4>();
    q.psi = x[4];
    q.theta = x[5];
    q.phi = x[6];
    q.v_world = Vector3d(x[7], 0.0, 0.0);
    return q;
}

} // namespace

TEST_CASE("artifact round trip preserves every field bit for bit") {
    auto m = make_model(36, 2, 1e-2, 41);
    const std::string path = "/tmp/ggps_art_rt.ggps";
    save_artifact(path, m.meta, m.pre);

    auto a = load_artifact(path);
    CHECK(a.meta.kernel.sigma == m.p.sigma);
    CHECK(a.meta.kernel.length_scale == m.p.length_scale);
    CHECK(a.meta.kernel.jitter == m.p.jitter);
    CHECK(a.meta.kernel.grad_noise == m.p.grad_noise);
    CHECK(a.meta.grad_dims == m.ts.grad_dims);
    CHECK(a.meta.with_schur == true);
    CHECK(a.meta.eps == 1e-2);
    CHECK(a.meta.seed == 41);
    CHECK(a.meta.n_train == 36);
    CHECK(a.meta.oracle_version == std::string(kOracleVersion));
    CHECK(a.meta.stats.x_min == m.ts.stats.x_min);
    CHECK(a.meta.stats.x_max == m.ts.stats.x_max);
    CHECK(a.meta.stats.y_mean == m.ts.stats.y_mean);
    CHECK(a.meta.stats.y_var == m.ts.stats.y_var);
    CHECK(a.meta.stats.half_range == m.ts.stats.half_range);
    CHECK(a.meta.quad.mass == kQuad.mass);
    CHECK(a.meta.quad.p_f == kQuad.p_f);
    CHECK(a.meta.quad.t_z == kQuad.t_z);
    CHECK(a.meta.centroids == m.meta.centroids);

    REQUIRE(a.bins.size() == m.pre.size());
    for (size_t i = 0; i < a.bins.size(); ++i) {
        CHECK(a.bins[i].id == m.pre[i].bin_id);
        CHECK(a.bins[i].near_pt_idx == m.pre[i].near_pt_idx);
        CHECK(a.bins[i].near_pts == m.pre[i].near_pts);
        CHECK(a.bins[i].S_inv == m.pre[i].S_inv);
        CHECK(a.bins[i].W == m.pre[i].W);
        CHECK(a.bins[i].solver_iterations == m.pre[i].solver_iterations);
        CHECK(a.bins[i].solver_residual == m.pre[i].solver_residual);
    }
    std::remove(path.c_str());
}

TEST_CASE("artifact writes are byte-identical and survive a save-load-save loop") {
    auto m = make_model(24, 2, 5e-2, 43);
    const std::string p1 = "/tmp/ggps_art_a.ggps";
    const std::string p2 = "/tmp/ggps_art_b.ggps";
    const std::string p3 = "/tmp/ggps_art_c.ggps";
    save_artifact(p1, m.meta, m.pre);
    save_artifact(p2, m.meta, m.pre);
    CHECK(slurp(p1) == slurp(p2));

    auto loaded = load_artifact(p1);
    std::vector<BinPrecomp> rebins;
    for (const auto& b : loaded.bins) {
        BinPrecomp pre;
        pre.bin_id = b.id;
        pre.solver_iterations = b.solver_iterations;
        pre.solver_residual = b.solver_residual;
        pre.near_pt_idx = b.near_pt_idx;
        pre.near_pts = b.near_pts;
        pre.S_inv = b.S_inv;
        pre.W = b.W;
        rebins.push_back(std::move(pre));
    }
    save_artifact(p3, loaded.meta, rebins);
    CHECK(slurp(p1) == slurp(p3));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
    std::remove(p3.c_str());
}

TEST_CASE("artifact loader rejects damaged files") {
    auto m = make_model(16, 1, 1e-1, 47);
    const std::string path = "/tmp/ggps_art_bad.ggps";
    save_artifact(path, m.meta, m.pre);
    const std::string good = slurp(path);

    spit(path, good.substr(0, good.size() * 7 / 10));
    CHECK_THROWS_AS((void)load_artifact(path), std::runtime_error);

    std::string bad_magic = good;
    bad_magic[0] = 'X';
    spit(path, bad_magic);
    try {
        (void)load_artifact(path);
        FAIL("expected runtime_error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("magic") != std::string::npos);
    }

    std::string bad_version = good;
    bad_version[4] = 99;
    spit(path, bad_version);
    CHECK_THROWS_AS((void)load_artifact(path), std::invalid_argument);

    CHECK_THROWS_AS((void)load_artifact("/tmp/ggps_art_missing.ggps"), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("artifact writer enforces the bin count") {
    auto m = make_model(16, 2, 1e-1, 53);
    const std::string path = "/tmp/ggps_art_cnt.ggps";
    {
        ArtifactWriter w(path, m.meta);
        w.add_bin(m.pre[0]);
        CHECK_THROWS_AS(w.finish(), std::invalid_argument);
    }
    {
        ArtifactWriter w(path, m.meta);
        w.add_bin(m.pre[0]);
        w.add_bin(m.pre[1]);
        CHECK_THROWS_AS(w.add_bin(m.pre[0]), std::invalid_argument);
        w.finish();
    }
    CHECK(load_artifact(path).bins.size() == 2);
    std::remove(path.c_str());
}

TEST_CASE("householder reflection aligns, involutes and mirrors") {
    std::mt19937_64 rng(61);
    for (int t = 0; t < 40; ++t) {
        Vector3d v = tu::rand_vec(rng, 3, -5.0, 5.0);
        if (v.norm() < 1e-6) continue;
        Eigen::Matrix3d H = householder_align(v);
        CHECK((H * v.normalized() - Vector3d::UnitX()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((H - H.transpose()).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((H * H - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-14);
        const double expected_det =
            (v.normalized() - Vector3d::UnitX()).norm() < 1e-9 ? 1.0 : -1.0;
        CHECK(H.determinant() == doctest::Approx(expected_det).epsilon(1e-10));
    }
    CHECK(householder_align(Vector3d::Zero()) == Eigen::Matrix3d::Identity());
    CHECK(householder_align(Vector3d(3.0, 0.0, 0.0)) == Eigen::Matrix3d::Identity());
    Eigen::Matrix3d Hm = householder_align(Vector3d(-2.0, 0.0, 0.0));
    CHECK((Hm * Vector3d(-1, 0, 0) - Vector3d::UnitX()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("aligned state recovers the training parameterization") {
    auto m = make_model(20, 1, 1e-1, 59);
    const std::string path = "/tmp/ggps_rt_align.ggps";
    save_artifact(path, m.meta, m.pre);
    auto model = SurrogateModel::load(path);

    Eigen::Matrix<double, 8, 1> x;
    x << 2500, 3100, 1800, 4200, 0.7, -0.5, 0.9, 6.0;
    auto q = query_from_state(x);
    Eigen::Matrix3d H;
    double det = 0.0;
    auto xa = model.aligned_state(q, &H, &det);
    CHECK((xa - x).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(H == Eigen::Matrix3d::Identity());
    CHECK(det == doctest::Approx(1.0).epsilon(1e-12));

    // zero airspeed: aligned frame is the world frame
    q.v_world.setZero();
    xa = model.aligned_state(q);
    CHECK(xa[7] == 0.0);
    CHECK(std::abs(xa[4] - 0.7) < 1e-12);

    // malformed queries must be rejected up front
    q.theta = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS((void)model.aligned_state(q), std::invalid_argument);
    q.theta = -0.5;
    q.rotor_rpm[2] = -10.0;
    CHECK_THROWS_AS((void)model.aligned_state(q), std::invalid_argument);
    std::remove(path.c_str());
}

TEST_CASE("queries at training points reproduce the oracle") {
    // single bin with an effectively infinite near cutoff: the runtime should
    // interpolate the training residuals through the whole recomposition
    auto m = make_model(60, 1, 1e-300, 67);
    const std::string path = "/tmp/ggps_rt_probe.ggps";
    save_artifact(path, m.meta, m.pre);
    auto model = SurrogateModel::load(path);
    REQUIRE(model.near_rows(0) == 60 * 8);

    const VectorXd y_sd = m.ts.stats.y_var.cwiseSqrt();
    int probed = 0;
    for (int i = 0; i < 60 && probed < 12; ++i) {
        const auto& x = m.cases[static_cast<size_t>(i)].x;
        if (x.head<4>().minCoeff() < 1.0 || x[7] < 0.5) continue;
        ++probed;
        auto pred = model.query(query_from_state(x));
        CHECK(pred.bin_id == 0);
        CHECK(pred.latency_ns > 0);
        CHECK(pred.extrapolation == false);

        Eigen::Matrix<double, 9, 1> want;
        auto r = synthetic_oracle(x, kQuad);
        want << r.y_aero, r.y_noise;
        for (int k = 0; k < kOutputDim; ++k)
            CHECK(std::abs(pred.mean[k] - want[k]) < 1e-3 * y_sd[k]);
        // interpolation leaves almost no posterior variance
        for (int k = 0; k < kOutputDim; ++k)
            CHECK(pred.std[k] * pred.std[k] < 1e-3 * m.ts.stats.y_var[k]);
    }
    REQUIRE(probed == 12);

    // bit-identical repetition
    auto p1 = model.query(query_from_state(m.cases[3].x));
    auto p2 = model.query(query_from_state(m.cases[3].x));
    CHECK(p1.mean == p2.mean);
    CHECK(p1.std == p2.std);
    std::remove(path.c_str());
}

TEST_CASE("loaded runtime matches the in-memory prediction route") {
    auto m = make_model(40, 2, 1e-2, 71);
    const std::string path = "/tmp/ggps_rt_xcheck.ggps";
    save_artifact(path, m.meta, m.pre);
    auto model = SurrogateModel::load(path);

    std::mt19937_64 rng(73);
    auto b = SampleBounds::flight_envelope();
    for (int t = 0; t < 25; ++t) {
        Eigen::Matrix<double, 8, 1> x;
        for (int c = 0; c < kStateDim; ++c)
            x[c] = tu::uniform(rng, c < 4 ? 1.0 : b.lo[c], b.hi[c]);
        auto pred = model.query(query_from_state(x));

        const VectorXd xt = normalize_input(x, m.ts.stats);
        const int bin = locate_bin(xt, m.meta.centroids);
        CHECK(pred.bin_id == bin);
        CHECK(bin == locate_bin(xt, m.bins));

        auto manual = predict_partitioned(xt, m.pre[static_cast<size_t>(bin)], m.p);
        VectorXd mean, var;
        denormalize_prediction(manual.mean,
                               VectorXd::Constant(kOutputDim, manual.var), m.ts.stats,
                               mean, var);
        ModelEval base = eval_model(kQuad, x.head<7>());
        Eigen::Matrix<double, 9, 1> want;
        want.head<6>() = mean.head<6>() + base.wrench;
        want.tail<3>() = mean.tail<3>();
        for (int k = 0; k < kOutputDim; ++k)
            CHECK(std::abs(pred.mean[k] - want[k]) < 1e-9 * (1.0 + std::abs(want[k])));
        // variance runs through the float32 mirror: compare loosely
        for (int k = 0; k < kOutputDim; ++k)
            CHECK(std::abs(pred.std[k] * pred.std[k] - var[k]) <
                  1e-4 * std::max(m.ts.stats.y_var[k], var[k]));
    }
    std::remove(path.c_str());
}

TEST_CASE("rotating a query rotates the prediction") {
    auto m = make_model(40, 2, 1e-2, 79);
    const std::string path = "/tmp/ggps_rt_equiv.ggps";
    save_artifact(path, m.meta, m.pre);
    auto model = SurrogateModel::load(path);

    std::mt19937_64 rng(83);
    for (int t = 0; t < 30; ++t) {
        Eigen::Matrix<double, 8, 1> x;
        x << tu::uniform(rng, 500, 6500), tu::uniform(rng, 500, 6500),
            tu::uniform(rng, 500, 6500), tu::uniform(rng, 500, 6500),
            tu::uniform(rng, -1.2, 1.2), tu::uniform(rng, -0.9, 0.9),
            tu::uniform(rng, -1.2, 1.2), tu::uniform(rng, 1.0, 18.0);

        // rotate the whole scene by Q = H_B * H_A: the airspeed direction
        // moves from u_A to u_B and both queries share one aligned state, so
        // their predictions must be related by Q exactly
        Vector3d ua = tu::rand_vec(rng, 3, -1.0, 1.0);
        Vector3d ub = tu::rand_vec(rng, 3, -1.0, 1.0);
        if (ua.norm() < 1e-3 || ub.norm() < 1e-3) continue;
        ua.normalize();
        ub.normalize();
        const Eigen::Matrix3d Q = householder_align(ub) * householder_align(ua);
        CHECK(Q.determinant() == doctest::Approx(1.0).epsilon(1e-9));

        WorldQuery qa;
        qa.rotor_rpm = x.head<4>();
        qa.psi = x[4];
        qa.theta = x[5];
        qa.phi = x[6];
        qa.v_world = x[7] * ua;

        WorldQuery qb = qa;
        const Vector3d ang_b =
            euler_zyx_from_matrix(Q * rotation_zyx(x[4], x[5], x[6]));
        qb.psi = ang_b[0];
        qb.theta = ang_b[1];
        qb.phi = ang_b[2];
        qb.v_world = Q * qa.v_world;

        CHECK((model.aligned_state(qa) - model.aligned_state(qb))
                  .cwiseAbs()
                  .maxCoeff() < 1e-9);

        auto pa = model.query(qa);
        auto pb = model.query(qb);
        // both queries see the same (generically mirror-ambiguous) frame
        CHECK(std::abs(std::abs(pa.det_aligned) - 1.0) < 1e-9);
        CHECK(pa.det_aligned == doctest::Approx(pb.det_aligned).epsilon(1e-9));

        Eigen::Matrix<double, 9, 1> want;
        want.segment<3>(0) = Q * pa.mean.segment<3>(0);
        want.segment<3>(3) = Q * pa.mean.segment<3>(3);
        want.segment<3>(6) = pa.mean.segment<3>(6);
        for (int k = 0; k < kOutputDim; ++k)
            CHECK(std::abs(pb.mean[k] - want[k]) < 1e-6 * (1.0 + std::abs(want[k])));
        CHECK((pb.std - pa.std).cwiseAbs().maxCoeff() < 1e-6);
    }

    // a generic single query runs through a mirror-ambiguous aligned frame
    WorldQuery q;
    q.rotor_rpm << 3000, 3200, 2800, 3100;
    q.psi = 0.4;
    q.theta = 0.2;
    q.phi = -0.3;
    q.v_world = Vector3d(3.0, 4.0, 1.0);
    auto p = model.query(q);
    CHECK(p.det_aligned == doctest::Approx(-1.0).epsilon(1e-9));
    std::remove(path.c_str());
}

TEST_CASE("extrapolation flag trips outside the training envelope") {
    auto m = make_model(30, 1, 1e-1, 89);
    const std::string path = "/tmp/ggps_rt_extrap.ggps";
    save_artifact(path, m.meta, m.pre);
    auto model = SurrogateModel::load(path);

    // far above any sampled rotor speed (bounds cap the training set at 7000)
    Eigen::Matrix<double, 8, 1> x;
    x << 9000, 9000, 9000, 9000, 0, 0, 0, 5;
    CHECK(model.query(query_from_state(x)).extrapolation == true);

    // deep interior of the sampled box
    Eigen::Matrix<double, 8, 1> mid =
        (m.ts.stats.x_min + m.ts.stats.x_max) / 2.0;
    CHECK(model.query(query_from_state(mid)).extrapolation == false);
    std::remove(path.c_str());
}
