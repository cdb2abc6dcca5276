#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ggps/bench.hpp"
#include "ggps/compare.hpp"
#include "ggps/config.hpp"
#include "ggps/pipeline.hpp"
#include "test_util.hpp"

using namespace ggps;

namespace {

std::string slurp_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

RunConfig small_cfg(const std::string& tag) {
    RunConfig cfg = build_config({});
    cfg.dataset.n_samples = 60;
    cfg.dataset.seed = 11;
    cfg.partition.n_bins = 2;
    cfg.partition.seed = 11;
    cfg.partition.eps = 1e-2;
    cfg.paths.dataset = "/tmp/ggps_ds_" + tag + ".jsonl";
    cfg.paths.artifact = "/tmp/ggps_model_" + tag + ".ggps";
    cfg.paths.report = "/tmp/ggps_report_" + tag + ".csv";
    return cfg;
}

} // namespace

TEST_CASE("config defaults match the documented schema") {
    const RunConfig cfg = build_config({});
    CHECK(cfg.kernel_sigma == 1.0);
    CHECK(cfg.kernel_length_scale == 0.5);
    CHECK(cfg.kernel_jitter == 1e-10);
    CHECK(cfg.kernel_noise_scale == 0.3);
    CHECK(cfg.partition.n_bins == 8);
    CHECK(cfg.partition.eps == 1e-3);
    CHECK(cfg.partition.target_near_size == 0);
    CHECK(cfg.dataset.n_samples == 1000);
    CHECK(cfg.dataset.oracle == std::string(kOracleVersion));
    CHECK(cfg.dataset.gradients == GradientMode::fd);
    CHECK(cfg.solver.mode == SolverMode::direct);
    CHECK(cfg.train.with_schur == true);
    CHECK(cfg.train.global_inverse == false);
    CHECK(cfg.bench.n_queries == 200);
    CHECK(cfg.compare.n_test == 1000);
    CHECK(cfg.threads == 1);
    CHECK(cfg.paths.artifact == "model.ggps");

    // default bounds reproduce the standard flight envelope
    const SampleBounds b = cfg.bounds();
    const SampleBounds want = SampleBounds::flight_envelope();
    CHECK((b.lo - want.lo).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((b.hi - want.hi).cwiseAbs().maxCoeff() < 1e-12);

    // every config key appears in the schema text
    const std::string schema = config_schema();
    for (const char* key :
         {"seed", "threads", "kernel.sigma", "kernel.length_scale", "kernel.jitter",
          "kernel.noise_scale", "partition.n_bins", "partition.eps", "partition.target_near",
          "partition.seed", "dataset.n_samples", "dataset.seed", "dataset.oracle",
          "dataset.gradients", "dataset.rpm_min", "dataset.rpm_max", "dataset.yaw_deg",
          "dataset.pitch_deg", "dataset.roll_deg", "dataset.v_min", "dataset.v_max", "quad.mass",
          "quad.g", "quad.l_x", "quad.l_y", "quad.hover_rpm", "quad.t_z_factor", "solver.mode",
          "solver.tol", "solver.max_iters", "train.with_schur", "train.global_inverse",
          "bench.n_queries", "bench.warmup", "bench.seed", "compare.n_test", "compare.bootstrap",
          "compare.timing_queries", "compare.mem_budget_mb", "paths.dataset", "paths.artifact",
          "paths.report", "paths.queries", "paths.predictions"}) {
        CAPTURE(key);
        CHECK(schema.find(key) != std::string::npos);
    }
}

TEST_CASE("config text parsing handles comments, quotes and bad lines") {
    const auto kv = parse_config_text("# header comment\n"
                                      "kernel.sigma = 2.5   # trailing\n"
                                      "\n"
                                      "paths.dataset = \"my data.jsonl\"\n"
                                      "dataset.oracle = synth-v2\n");
    CHECK(kv.at("kernel.sigma") == "2.5");
    CHECK(kv.at("paths.dataset") == "my data.jsonl");
    CHECK(kv.size() == 3);

    CHECK_THROWS_AS((void)parse_config_text("kernel.sigma 2.5\n"), ConfigError);
    CHECK_THROWS_AS((void)parse_config_text("a=1\na=2\n"), ConfigError);
    CHECK_THROWS_AS((void)parse_config_text("bad key = 1\n"), ConfigError);
    CHECK_THROWS_AS((void)parse_config_text("k =\n"), ConfigError);

    try {
        (void)parse_config_text("ok.key = 1\nbroken line\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("config rejects unknown keys and out-of-range values") {
    try {
        (void)build_config({{"kernel.sigmah", "1.0"}});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("kernel.sigmah") != std::string::npos);
    }

    CHECK_THROWS_AS((void)build_config({{"kernel.sigma", "0"}}), ConfigError);
    CHECK_THROWS_AS((void)build_config({{"kernel.sigma", "abc"}}), ConfigError);
    CHECK_THROWS_AS((void)build_config({{"partition.eps", "1.5"}}), ConfigError);
    CHECK_THROWS_AS((void)build_config({{"partition.n_bins", "0"}}), ConfigError);
    CHECK_THROWS_AS((void)build_config({{"dataset.pitch_deg", "89.5"}}), ConfigError);
    CHECK_THROWS_AS((void)build_config({{"dataset.oracle", "synth-v9"}}), ConfigError);
    CHECK_THROWS_AS((void)build_config({{"dataset.gradients", "exact"}}), ConfigError);
    CHECK_THROWS_AS((void)build_config({{"solver.mode", "qr"}}), ConfigError);
    CHECK_THROWS_AS((void)build_config({{"train.with_schur", "1"}}), ConfigError);
    CHECK_THROWS_AS((void)build_config({{"quad.mass", "-2"}}), ConfigError);
    CHECK_THROWS_AS((void)build_config({{"seed", "-4"}}), ConfigError);
    CHECK_THROWS_AS((void)build_config({{"paths.report", ""}}), ConfigError);

    // cross-field coherence
    try {
        (void)build_config({{"dataset.rpm_max", "100"}, {"dataset.rpm_min", "200"}});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("dataset.rpm_max") != std::string::npos);
    }
    CHECK_THROWS_AS(
        (void)build_config({{"train.global_inverse", "true"}, {"train.with_schur", "false"}}),
        ConfigError);
}

TEST_CASE("seed fallbacks resolve only when the specific key is absent") {
    const RunConfig a = build_config({{"seed", "42"}});
    CHECK(a.seed == 42);
    CHECK(a.dataset.seed == 42);
    CHECK(a.partition.seed == 42);
    CHECK(a.bench.seed == 42);

    const RunConfig b = build_config({{"seed", "42"}, {"dataset.seed", "7"}});
    CHECK(b.dataset.seed == 7);
    CHECK(b.partition.seed == 42);
}

TEST_CASE("file config loads, converts degrees, and yields to overrides") {
    const std::string path = "/tmp/ggps_cfg_test.cfg";
    {
        std::ofstream f(path);
        f << "kernel.length_scale = 0.7\n"
          << "dataset.yaw_deg = 45\n"
          << "partition.n_bins = 3\n"
          << "seed = 5\n";
    }
    const RunConfig cfg = load_config(path);
    CHECK(cfg.kernel_length_scale == 0.7);
    CHECK(cfg.partition.n_bins == 3);
    CHECK(cfg.bounds().hi[4] == doctest::Approx(45.0 * M_PI / 180.0).epsilon(1e-14));

    const RunConfig ov = load_config(path, {{"partition.n_bins", "5"}, {"seed", "9"}});
    CHECK(ov.partition.n_bins == 5);
    CHECK(ov.seed == 9);
    CHECK(ov.dataset.seed == 9); // fallback follows the override

    CHECK_THROWS_AS((void)load_config("/tmp/ggps_no_such_file.cfg"), ConfigError);
    std::remove(path.c_str());

    // kernel params pick up the dataset-derived gradient noise
    Eigen::VectorXd l2 = Eigen::VectorXd::Constant(7, 0.25);
    const KernelParams p = cfg.kernel_params(l2);
    CHECK(p.length_scale == 0.7);
    CHECK(p.grad_noise == l2);
}

TEST_CASE("generate and train produce identical bytes for identical configs") {
    RunConfig cfg = small_cfg("det");
    (void)generate_to_file(cfg);
    const std::string ds1 = slurp_file(cfg.paths.dataset);
    (void)generate_to_file(cfg);
    CHECK(slurp_file(cfg.paths.dataset) == ds1);

    const auto ds = load_dataset(cfg.paths.dataset);
    REQUIRE(ds.cases.size() == 60);

    const auto res1 = train_to_file(cfg, ds.cases);
    const std::string art1 = slurp_file(cfg.paths.artifact);
    REQUIRE(res1.bins.size() == 2);
    for (const auto& st : res1.bins) {
        CHECK(st.near_rows == st.near_points * 8);
        CHECK(st.near_points + st.far_rows / 8 == 60);
        CHECK(st.anchor_points > 0);
        CHECK(st.anchor_points <= st.near_points);
    }

    const auto res2 = train_to_file(cfg, ds.cases);
    (void)res2;
    CHECK(slurp_file(cfg.paths.artifact) == art1);

    // scheduling must not leak into the artifact
    cfg.threads = 3;
    (void)train_to_file(cfg, ds.cases);
    CHECK(slurp_file(cfg.paths.artifact) == art1);

    // the artifact round-trips into a queryable model
    const auto model = SurrogateModel::load(cfg.paths.artifact);
    CHECK(model.n_bins() == 2);
    CHECK(model.meta().n_train == 60);

    std::remove(cfg.paths.dataset.c_str());
    std::remove(cfg.paths.artifact.c_str());
}

TEST_CASE("prediction stream answers good lines and skips bad ones") {
    RunConfig cfg = small_cfg("pred");
    (void)generate_to_file(cfg);
    const auto ds = load_dataset(cfg.paths.dataset);
    (void)train_to_file(cfg, ds.cases);
    const auto model = SurrogateModel::load(cfg.paths.artifact);

    std::istringstream in(
        R"({"r": [3000, 3100, 2900, 3050], "psi": 30.0, "theta": -10.0, "phi": 5.0, "v": [4.0, 1.0, -0.5]})"
        "\n"
        "\n" // blank line ignored
        R"({"r": [3000, 3100, 2900], "psi": 0, "theta": 0, "phi": 0, "v": [1, 0, 0]})"
        "\n"
        "not json at all\n"
        R"({"r": [2000, 2000, 2000, 2000], "psi": 0.0, "theta": 0.0, "phi": 0.0, "v": [0.0, 0.0, 0.0]})"
        "\n");
    std::ostringstream out, warn;
    const auto stats = predict_stream(model, in, out, &warn);
    CHECK(stats.n_ok == 2);
    CHECK(stats.n_failed == 2);
    CHECK(stats.median_ms > 0.0);
    CHECK(warn.str().find("line 3") != std::string::npos);
    CHECK(warn.str().find("line 4") != std::string::npos);

    std::istringstream lines(out.str());
    std::string line;
    int n_lines = 0;
    while (std::getline(lines, line)) {
        ++n_lines;
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("mean").size() == 9);
        CHECK(j.at("std").size() == 9);
        CHECK(j.at("bin_id").is_number_integer());
        CHECK(j.at("latency_ns").get<long long>() > 0);
        CHECK(j.at("extrapolation").is_boolean());
    }
    CHECK(n_lines == 2);

    // degrees at the boundary: psi 90 deg must equal the radian query
    std::istringstream in2(
        R"({"r": [3000, 3000, 3000, 3000], "psi": 90.0, "theta": 0.0, "phi": 0.0, "v": [3.0, 0.0, 0.0]})"
        "\n");
    std::ostringstream out2;
    (void)predict_stream(model, in2, out2);
    const auto j2 = nlohmann::json::parse(out2.str());
    WorldQuery q;
    q.rotor_rpm.setConstant(3000.0);
    q.psi = M_PI / 2.0;
    q.v_world = Eigen::Vector3d(3.0, 0.0, 0.0);
    const auto direct = model.query(q);
    for (int k = 0; k < 9; ++k)
        CHECK(j2.at("mean")[static_cast<size_t>(k)].get<double>() ==
              doctest::Approx(direct.mean[k]).epsilon(1e-12));

    // empty input: zero predictions, no failures
    std::istringstream empty_in("");
    std::ostringstream empty_out;
    const auto empty_stats = predict_stream(model, empty_in, empty_out);
    CHECK(empty_stats.n_ok == 0);
    CHECK(empty_stats.n_failed == 0);
    CHECK(empty_out.str().empty());

    std::remove(cfg.paths.dataset.c_str());
    std::remove(cfg.paths.artifact.c_str());
}

TEST_CASE("bench draws a deterministic in-bounds query sequence") {
    RunConfig cfg = small_cfg("bench");
    (void)generate_to_file(cfg);
    const auto ds = load_dataset(cfg.paths.dataset);
    (void)train_to_file(cfg, ds.cases);
    const auto model = SurrogateModel::load(cfg.paths.artifact);

    const auto qa = draw_bench_queries(model.meta(), 40, 7);
    const auto qb = draw_bench_queries(model.meta(), 40, 7);
    const auto qc = draw_bench_queries(model.meta(), 40, 8);
    REQUIRE(qa.size() == 40);
    bool all_same = true, any_diff = false;
    for (size_t i = 0; i < qa.size(); ++i) {
        all_same = all_same && qa[i].rotor_rpm == qb[i].rotor_rpm && qa[i].psi == qb[i].psi &&
                   qa[i].v_world == qb[i].v_world;
        any_diff = any_diff || qa[i].rotor_rpm != qc[i].rotor_rpm;
        CHECK(model.query(qa[i]).extrapolation == false);
    }
    CHECK(all_same);
    CHECK(any_diff);

    BenchConfig bc;
    bc.n_queries = 25;
    bc.warmup = 3;
    bc.seed = 5;
    const auto r = run_bench(model, bc);
    CHECK(r.n_queries == 25);
    CHECK(r.min_ms > 0.0);
    CHECK(r.min_ms <= r.median_ms);
    CHECK(r.median_ms <= r.p95_ms);
    CHECK(r.p95_ms <= r.max_ms);
    CHECK(r.total_s > 0.0);
    CHECK(r.peak_rss_kb > 0);

    std::remove(cfg.paths.dataset.c_str());
    std::remove(cfg.paths.artifact.c_str());
}

TEST_CASE("bootstrap pair counts ordered columns correctly") {
    std::mt19937_64 rng(17);
    const int n = 400;
    Eigen::MatrixXd A(n, 9), B(n, 9);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < 9; ++k) {
            const double scale_a = k == 8 ? 1.0 : 0.5; // last column reversed
            const double scale_b = k == 8 ? 0.5 : 1.0;
            A(i, k) = scale_a * tu::uniform(rng, 0.0, 1.0);
            B(i, k) = scale_b * tu::uniform(rng, 0.0, 1.0);
        }
    }
    const auto c = bootstrap_pair("A", A, "B", B, 300, 99);
    CHECK(c.available);
    CHECK(c.wins == 8);
    CHECK(c.confident_wins >= 8);
    CHECK(c.confidence[8] < 0.5);
    CHECK(c.ratio[0] == doctest::Approx(0.5).epsilon(0.25));
    CHECK(c.worst_ratio > 1.0);
    CHECK(c.worst_ratio == c.ratio[8]);
}

TEST_CASE("variant comparison runs the full matrix on a small problem") {
    RunConfig cfg = small_cfg("cmp");
    cfg.dataset.n_samples = 80;
    cfg.dataset.seed = 23;
    cfg.partition.seed = 23;
    cfg.compare.n_test = 60;
    cfg.compare.bootstrap = 200;
    cfg.compare.timing_queries = 10;
    (void)generate_to_file(cfg);
    const auto ds = load_dataset(cfg.paths.dataset);

    const auto res = run_compare(cfg, ds.cases);
    CHECK(res.skipped.empty());
    REQUIRE(res.rows.size() == 6 * 9);
    for (const char* name : {"GP", "GP-G", "GP-S-1X", "GP-S-8X", "GP-G-S", "GP-G-S-NS"}) {
        CAPTURE(name);
        REQUIRE(res.abs_err.count(name) == 1);
        const auto& err = res.abs_err.at(name);
        CHECK(err.rows() == 60);
        CHECK(err.cols() == 9);
        CHECK(err.minCoeff() >= 0.0);
        CHECK(err.allFinite());
        CHECK(res.train_s.at(name) >= 0.0);
        CHECK(res.predict_ms.at(name) > 0.0);
    }

    // gradient conditioning adds 7 rows of information per point; it must
    // dominate the value-only fit on most outputs even at this small scale
    CHECK(res.grad_vs_plain.available);
    CHECK(res.grad_vs_plain.wins >= 6);
    CHECK(res.gs_vs_s1x.available);
    CHECK(res.gs_vs_s1x.wins >= 6);
    CHECK(res.schur_vs_noschur.available);

    // the standing gate: partitioned route equals the dense reference
    CHECK(res.equivalence_gap < 1e-8);

    write_report_csv(cfg.paths.report, res.rows);
    std::ifstream f(cfg.paths.report);
    std::string header;
    std::getline(f, header);
    CHECK(header == "variant,output_dim,median_abs_err,p95_abs_err,train_s,predict_ms_median");
    int n_lines = 0;
    std::string line;
    while (std::getline(f, line))
        if (!line.empty()) ++n_lines;
    CHECK(n_lines == 54);

    std::remove(cfg.paths.dataset.c_str());
    std::remove(cfg.paths.report.c_str());
}

TEST_CASE("memory gate skips oversized variants without failing the run") {
    RunConfig cfg = small_cfg("gate");
    cfg.dataset.n_samples = 80;
    cfg.compare.n_test = 40;
    cfg.compare.bootstrap = 100;
    cfg.compare.mem_budget_mb = 1; // dense 640x640 stays under, 5120x5120 does not
    (void)generate_to_file(cfg);
    const auto ds = load_dataset(cfg.paths.dataset);

    const auto res = run_compare(cfg, ds.cases);
    CHECK(!res.skipped.empty());
    bool gpg_skipped = false;
    for (const auto& s : res.skipped)
        if (s.rfind("GP-G:", 0) == 0) gpg_skipped = true;
    CHECK(gpg_skipped);
    CHECK(res.abs_err.count("GP") == 1);
    CHECK(res.abs_err.count("GP-G") == 0);
    CHECK(!res.grad_vs_plain.available);

    int skipped_rows = 0;
    for (const auto& r : res.rows)
        if (r.output_dim == -1) ++skipped_rows;
    CHECK(skipped_rows == static_cast<int>(res.skipped.size()));

    std::remove(cfg.paths.dataset.c_str());
}
