#include "ggps/compare.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "ggps/gp_dense.hpp"
#include "ggps/partition.hpp"
#include "ggps/pipeline.hpp"
#include "ggps/quad_model.hpp"
#include "ggps/schur.hpp"

namespace ggps {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const size_t h = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
    double m = v[h];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h - 1),
                         v.begin() + static_cast<std::ptrdiff_t>(h));
        m = 0.5 * (m + v[h - 1]);
    }
    return m;
}

double percentile(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const size_t idx = static_cast<size_t>(q * (static_cast<double>(v.size()) - 1.0) + 0.5);
    return v[std::min(idx, v.size() - 1)];
}

// physical-space absolute errors of one residual prediction
void score_row(const Eigen::VectorXd& mean_tilde, const NormStats& stats,
               const QuadParams& quad, const Eigen::Matrix<double, 8, 1>& x,
               const Eigen::Matrix<double, 9, 1>& truth, Eigen::MatrixXd& err, int row) {
    Eigen::VectorXd mean, var;
    denormalize_prediction(mean_tilde, Eigen::VectorXd::Zero(kOutputDim), stats, mean, var);
    const ModelEval base = eval_model(quad, x.head<7>());
    for (int k = 0; k < 6; ++k) err(row, k) = std::abs(mean[k] + base.wrench[k] - truth[k]);
    for (int k = 6; k < kOutputDim; ++k) err(row, k) = std::abs(mean[k] - truth[k]);
}

struct VariantOutput {
    bool ran = false;
    std::string skip_reason;
    Eigen::MatrixXd abs_err;
    double train_s = std::numeric_limits<double>::quiet_NaN();
    double predict_ms = std::numeric_limits<double>::quiet_NaN();
};

struct TestBlock {
    Eigen::MatrixXd X_raw;   // n_t x 8
    Eigen::MatrixXd truth;   // n_t x 9
    int timing_queries = 0;
};

VariantOutput run_dense(const std::string& name, const KernelParams& p,
                        const TrainingSet& ts, bool with_grads, const TestBlock& tb,
                        const QuadParams& quad, double budget_bytes, std::ostream* log) {
    VariantOutput out;
    const Eigen::Index rows =
        with_grads ? ts.layout.total_rows() : static_cast<Eigen::Index>(ts.X_tilde.rows());
    const double projected = 16.0 * static_cast<double>(rows) * static_cast<double>(rows);
    if (projected > budget_bytes) {
        std::ostringstream ss;
        ss << "projected " << projected / 1e9 << " GB for " << rows
           << " dense rows exceeds compare.mem_budget_mb";
        out.skip_reason = ss.str();
        return out;
    }

    const Eigen::MatrixXd empty(0, ts.X_tilde.cols());
    const std::vector<int> no_dims;
    const auto t0 = Clock::now();
    const DenseGPModel m =
        with_grads ? fit_dense(p, ts.X_tilde, ts.X_tilde, ts.grad_dims, ts.Y_rows)
                   : fit_dense(p, ts.X_tilde, empty, no_dims, ts.Y_tilde);
    out.train_s = seconds_since(t0);

    const int n_t = static_cast<int>(tb.X_raw.rows());
    Eigen::MatrixXd Xq(n_t, kStateDim);
    for (int i = 0; i < n_t; ++i)
        Xq.row(i) = normalize_input(tb.X_raw.row(i).transpose(), ts.stats).transpose();
    const GPPrediction pred =
        with_grads ? predict_with_gradients(m, Xq) : predict_standard(m, Xq);

    out.abs_err.resize(n_t, kOutputDim);
    for (int i = 0; i < n_t; ++i) {
        score_row(pred.mean.row(i).transpose(), ts.stats, quad,
                  tb.X_raw.row(i).transpose(), tb.truth.row(i).transpose(), out.abs_err, i);
    }

    std::vector<double> lat;
    for (int i = 0; i < std::min(tb.timing_queries, n_t); ++i) {
        const auto q0 = Clock::now();
        const Eigen::VectorXd xt = normalize_input(tb.X_raw.row(i).transpose(), ts.stats);
        const GPPrediction one = with_grads ? predict_with_gradients(m, xt.transpose())
                                            : predict_standard(m, xt.transpose());
        Eigen::VectorXd mean, var;
        denormalize_prediction(one.mean.row(0).transpose(),
                               Eigen::VectorXd::Constant(kOutputDim, one.var[0]), ts.stats,
                               mean, var);
        lat.push_back(std::chrono::duration<double, std::milli>(Clock::now() - q0).count());
    }
    out.predict_ms = median(lat);
    out.ran = true;
    if (log)
        (*log) << "[compare] " << name << ": rows=" << rows << " train=" << out.train_s
               << "s predict=" << out.predict_ms << "ms\n";
    return out;
}

struct PartSpec {
    std::string name;
    KernelParams p;
    const Eigen::MatrixXd* X;      // normalized points
    const Eigen::MatrixXd* Y_rows; // stacked targets matching grad_dims
    std::vector<int> grad_dims;
    StackedLayout layout;
    NormStats stats;
    PartitionConfig pcfg;
    SolverConfig scfg;
    bool with_schur = true;
    bool global_route = false;
};

VariantOutput run_partitioned(const PartSpec& spec, const TestBlock& tb, const QuadParams& quad,
                              double budget_bytes, std::ostream* log) {
    VariantOutput out;
    const auto t0 = Clock::now();

    std::vector<BinSpec> bins = build_bins(*spec.X, spec.pcfg);
    double eps = spec.pcfg.eps;
    if (spec.pcfg.target_near_size > 0)
        eps = derive_eps(*spec.X, bins, spec.p, spec.pcfg.target_near_size);
    classify_all_bins(bins, *spec.X, spec.p, eps, spec.layout);

    double max_far = 0.0, max_near = 0.0;
    for (const auto& b : bins) {
        max_far = std::max(max_far, static_cast<double>(b.far_rows.size()));
        max_near = std::max(max_near, static_cast<double>(b.near_rows.size()));
    }
    const double R = static_cast<double>(spec.layout.total_rows());
    double projected;
    if (spec.global_route) {
        projected = 8.0 * (R * (R + 1.0) / 2.0 + R * kOutputDim) + 16.0 * max_near * max_near;
    } else if (spec.with_schur) {
        const double solve_extra = spec.scfg.mode == SolverMode::direct
                                       ? max_far * max_far
                                       : max_far * max_near;
        projected = 8.0 * (max_far * max_far + solve_extra + 2.0 * max_near * max_near +
                           3.0 * max_near * max_far);
    } else {
        projected = 8.0 * (3.0 * max_near * max_near);
    }
    if (projected > budget_bytes) {
        std::ostringstream ss;
        ss << "projected " << projected / 1e9 << " GB (near_rows=" << max_near
           << ", far_rows=" << max_far << ") exceeds compare.mem_budget_mb";
        out.skip_reason = ss.str();
        return out;
    }

    const int n_t = static_cast<int>(tb.X_raw.rows());
    Eigen::MatrixXd centroids(static_cast<Eigen::Index>(bins.size()), kStateDim);
    for (const auto& b : bins) centroids.row(b.id) = b.centroid;

    std::vector<std::vector<int>> assigned(bins.size());
    Eigen::MatrixXd Xq(n_t, kStateDim);
    for (int i = 0; i < n_t; ++i) {
        Xq.row(i) = normalize_input(tb.X_raw.row(i).transpose(), spec.stats).transpose();
        assigned[static_cast<size_t>(locate_bin(Xq.row(i).transpose(), centroids))].push_back(i);
    }

    out.abs_err.resize(n_t, kOutputDim);
    std::vector<double> lat;
    double predict_wall = 0.0;

    // bins stream through one at a time; each serves its assigned queries and
    // is dropped before the next precompute
    auto process_bin = [&](BinPrecomp&& pre) {
        const auto p0 = Clock::now();
        for (int idx : assigned[static_cast<size_t>(pre.bin_id)]) {
            const bool timed = idx < tb.timing_queries;
            const auto q0 = Clock::now();
            const Eigen::VectorXd xt = normalize_input(tb.X_raw.row(idx).transpose(), spec.stats);
            (void)locate_bin(xt, centroids);
            const PartitionedPrediction pr = predict_partitioned(xt, pre, spec.p);
            Eigen::VectorXd mean, var;
            denormalize_prediction(pr.mean, Eigen::VectorXd::Constant(kOutputDim, pr.var),
                                   spec.stats, mean, var);
            if (timed)
                lat.push_back(std::chrono::duration<double, std::milli>(Clock::now() - q0).count());
            score_row(pr.mean, spec.stats, quad, tb.X_raw.row(idx).transpose(),
                      tb.truth.row(idx).transpose(), out.abs_err, idx);
        }
        predict_wall += seconds_since(p0);
    };

    if (spec.global_route) {
        precompute_all_bins_global(bins, spec.p, *spec.X, spec.grad_dims, *spec.Y_rows, log,
                                   process_bin);
    } else {
        PrecompOptions opt;
        opt.mode = spec.scfg.mode;
        opt.solver_tol = spec.scfg.tol;
        opt.max_iters = spec.scfg.max_iters;
        opt.with_schur = spec.with_schur;
        opt.log = log;
        for (const auto& bin : bins)
            process_bin(precompute_bin(bin, spec.p, *spec.X, spec.grad_dims, *spec.Y_rows, opt));
    }

    out.train_s = seconds_since(t0) - predict_wall;
    out.predict_ms = median(lat);
    out.ran = true;
    if (log)
        (*log) << "[compare] " << spec.name << ": bins=" << bins.size() << " eps=" << eps
               << " train=" << out.train_s << "s predict=" << out.predict_ms << "ms\n";
    return out;
}

void append_rows(CompareResult& res, const std::string& name, const VariantOutput& v) {
    if (!v.ran) {
        res.skipped.push_back(name + ": " + v.skip_reason);
        ReportRow row;
        row.variant = name;
        row.output_dim = -1;
        res.rows.push_back(row);
        return;
    }
    res.abs_err[name] = v.abs_err;
    res.train_s[name] = v.train_s;
    res.predict_ms[name] = v.predict_ms;
    for (int k = 0; k < kOutputDim; ++k) {
        ReportRow row;
        row.variant = name;
        row.output_dim = k;
        std::vector<double> col(v.abs_err.col(k).data(),
                                v.abs_err.col(k).data() + v.abs_err.rows());
        row.median_abs_err = median(col);
        row.p95_abs_err = percentile(col, 0.95);
        row.train_s = v.train_s;
        row.predict_ms_median = v.predict_ms;
        res.rows.push_back(row);
    }
}

} // namespace

PairwiseClaim bootstrap_pair(const std::string& better_name, const Eigen::MatrixXd& err_better,
                             const std::string& worse_name, const Eigen::MatrixXd& err_worse,
                             int n_resamples, std::uint64_t seed) {
    PairwiseClaim c;
    c.better = better_name;
    c.worse = worse_name;
    if (err_better.rows() == 0 || err_better.rows() != err_worse.rows()) return c;
    c.available = true;

    const int n = static_cast<int>(err_better.rows());
    for (int k = 0; k < kOutputDim; ++k) {
        std::vector<double> a(err_better.col(k).data(), err_better.col(k).data() + n);
        std::vector<double> b(err_worse.col(k).data(), err_worse.col(k).data() + n);
        const double ma = median(a);
        const double mb = median(b);
        if (ma < mb) ++c.wins;
        c.ratio[static_cast<size_t>(k)] =
            mb > 0.0 ? ma / mb : (ma == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
    }
    c.worst_ratio = *std::max_element(c.ratio.begin(), c.ratio.end());

    std::mt19937_64 rng(seed);
    std::vector<int> idx(static_cast<size_t>(n));
    std::vector<double> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
    std::array<int, 9> agree{};
    for (int r = 0; r < n_resamples; ++r) {
        for (int i = 0; i < n; ++i)
            idx[static_cast<size_t>(i)] =
                static_cast<int>(rng() % static_cast<std::uint64_t>(n));
        for (int k = 0; k < kOutputDim; ++k) {
            for (int i = 0; i < n; ++i) {
                a[static_cast<size_t>(i)] = err_better(idx[static_cast<size_t>(i)], k);
                b[static_cast<size_t>(i)] = err_worse(idx[static_cast<size_t>(i)], k);
            }
            if (median(a) < median(b)) ++agree[static_cast<size_t>(k)];
        }
    }
    for (int k = 0; k < kOutputDim; ++k) {
        c.confidence[static_cast<size_t>(k)] =
            static_cast<double>(agree[static_cast<size_t>(k)]) / n_resamples;
        if (c.confidence[static_cast<size_t>(k)] >= 0.95) ++c.confident_wins;
    }
    return c;
}

CompareResult run_compare(const RunConfig& cfg, const std::vector<RawCase>& train_cases,
                          std::ostream* log) {
    CompareResult res;
    const double budget_bytes = static_cast<double>(cfg.compare.mem_budget_mb) * 1e6;

    const TrainingSet ts = normalize_dataset(train_cases, cfg.quad, cfg.kernel_noise_scale);
    const KernelParams p_g = cfg.kernel_params(ts.lambda2);
    const KernelParams p_v = cfg.kernel_params(Eigen::VectorXd());

    const SampleBounds bounds = cfg.bounds();
    const auto test_cases = generate_dataset(cfg.compare.n_test,
                                             derive_seed(cfg.dataset.seed, 2), bounds, cfg.quad,
                                             GradientMode::analytic);
    TestBlock tb;
    tb.timing_queries = cfg.compare.timing_queries;
    tb.X_raw.resize(cfg.compare.n_test, kStateDim);
    tb.truth.resize(cfg.compare.n_test, kOutputDim);
    for (int i = 0; i < cfg.compare.n_test; ++i) {
        const auto& c = test_cases[static_cast<size_t>(i)];
        tb.X_raw.row(i) = c.x.transpose();
        tb.truth.row(i).head<6>() = c.y_aero.transpose();
        tb.truth.row(i).tail<3>() = c.y_noise.transpose();
    }

    const StackedLayout layout_v{static_cast<int>(ts.X_tilde.rows()), 0, {}};

    append_rows(res, "GP", run_dense("GP", p_v, ts, false, tb, cfg.quad, budget_bytes, log));
    append_rows(res, "GP-G", run_dense("GP-G", p_g, ts, true, tb, cfg.quad, budget_bytes, log));

    {
        PartSpec s;
        s.name = "GP-S-1X";
        s.p = p_v;
        s.X = &ts.X_tilde;
        s.Y_rows = &ts.Y_tilde;
        s.layout = layout_v;
        s.stats = ts.stats;
        s.pcfg = cfg.partition;
        s.scfg = cfg.solver;
        append_rows(res, s.name, run_partitioned(s, tb, cfg.quad, budget_bytes, log));
    }

    // the value-only variant with the gradient rows' worth of extra points,
    // drawn independently so it is information-matched rather than reusing
    // the same samples
    {
        const int n8 = 8 * static_cast<int>(train_cases.size());
        const auto cases8 = generate_dataset(n8, derive_seed(cfg.dataset.seed, 8), bounds,
                                             cfg.quad, GradientMode::analytic);
        const TrainingSet ts8 = normalize_dataset(cases8, cfg.quad, cfg.kernel_noise_scale);
        PartSpec s;
        s.name = "GP-S-8X";
        s.p = p_v;
        s.X = &ts8.X_tilde;
        s.Y_rows = &ts8.Y_tilde;
        s.layout = StackedLayout{n8, 0, {}};
        s.stats = ts8.stats;
        s.pcfg = cfg.partition;
        s.scfg = cfg.solver;
        append_rows(res, s.name, run_partitioned(s, tb, cfg.quad, budget_bytes, log));
    }

    {
        PartSpec s;
        s.name = "GP-G-S";
        s.p = p_g;
        s.X = &ts.X_tilde;
        s.Y_rows = &ts.Y_rows;
        s.grad_dims = ts.grad_dims;
        s.layout = ts.layout;
        s.stats = ts.stats;
        s.pcfg = cfg.partition;
        s.scfg = cfg.solver;
        s.with_schur = true;
        s.global_route = cfg.train.global_inverse;
        append_rows(res, s.name, run_partitioned(s, tb, cfg.quad, budget_bytes, log));
    }
    {
        PartSpec s;
        s.name = "GP-G-S-NS";
        s.p = p_g;
        s.X = &ts.X_tilde;
        s.Y_rows = &ts.Y_rows;
        s.grad_dims = ts.grad_dims;
        s.layout = ts.layout;
        s.stats = ts.stats;
        s.pcfg = cfg.partition;
        s.scfg = cfg.solver;
        s.with_schur = false;
        append_rows(res, s.name, run_partitioned(s, tb, cfg.quad, budget_bytes, log));
    }

    const std::uint64_t bs = derive_seed(cfg.seed, 11);
    auto claim = [&](const std::string& a, const std::string& b) {
        if (res.abs_err.count(a) && res.abs_err.count(b))
            return bootstrap_pair(a, res.abs_err.at(a), b, res.abs_err.at(b),
                                  cfg.compare.bootstrap, bs);
        PairwiseClaim c;
        c.better = a;
        c.worse = b;
        return c;
    };
    res.grad_vs_plain = claim("GP-G", "GP");
    res.gs_vs_s1x = claim("GP-G-S", "GP-S-1X");
    res.schur_vs_noschur = claim("GP-G-S", "GP-G-S-NS");

    // standing dense-vs-partitioned equivalence gate: one bin, everything
    // near, compared against the exact dense route on the same data
    {
        const int n_eq = std::min<int>(static_cast<int>(train_cases.size()), 300);
        std::vector<RawCase> sub(train_cases.begin(), train_cases.begin() + n_eq);
        const TrainingSet tse = normalize_dataset(sub, cfg.quad, cfg.kernel_noise_scale);
        const KernelParams pe = cfg.kernel_params(tse.lambda2);

        const DenseGPModel dm = fit_dense(pe, tse.X_tilde, tse.X_tilde, tse.grad_dims, tse.Y_rows);

        PartitionConfig pc;
        pc.n_bins = 1;
        pc.seed = cfg.partition.seed;
        std::vector<BinSpec> bins = build_bins(tse.X_tilde, pc);
        classify_all_bins(bins, tse.X_tilde, pe, 1e-300, tse.layout);
        PrecompOptions opt;
        opt.mode = SolverMode::direct;
        const BinPrecomp pre =
            precompute_bin(bins[0], pe, tse.X_tilde, tse.grad_dims, tse.Y_rows, opt);

        std::mt19937_64 rng(derive_seed(cfg.seed, 3));
        double acc = 0.0;
        const int n_q = 500;
        for (int i = 0; i < n_q; ++i) {
            Eigen::VectorXd xq(kStateDim);
            for (int c = 0; c < kStateDim; ++c) xq[c] = 2.0 * uniform01(rng) - 1.0;
            const GPPrediction dp = predict_with_gradients(dm, xq.transpose());
            const PartitionedPrediction pp = predict_partitioned(xq, pre, pe);
            acc += (dp.mean.row(0).transpose() - pp.mean).cwiseAbs().mean();
        }
        res.equivalence_gap = acc / n_q;
        if (log)
            (*log) << "[compare] dense-vs-partitioned equivalence gap = " << res.equivalence_gap
                   << " (n=" << n_eq << ")\n";
    }

    return res;
}

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
    std::ofstream f(path);
    if (!f.good()) throw std::runtime_error("cannot open report file '" + path + "'");
    f << "variant,output_dim,median_abs_err,p95_abs_err,train_s,predict_ms_median\n";
    f << std::setprecision(10);
    for (const auto& r : rows) {
        f << r.variant << ',' << r.output_dim << ',' << r.median_abs_err << ','
          << r.p95_abs_err << ',' << r.train_s << ',' << r.predict_ms_median << "\n";
    }
    if (!f.good()) throw std::runtime_error("failed writing report file '" + path + "'");
}

} // namespace ggps
