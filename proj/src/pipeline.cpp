#include "ggps/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <exception>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "ggps/partition.hpp"
#include "ggps/schur.hpp"

namespace ggps {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

double percentile_ms(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t idx = static_cast<size_t>(q * (static_cast<double>(v.size()) - 1.0) + 0.5);
    return v[std::min(idx, v.size() - 1)];
}

BinTrainStat stat_from(const BinSpec& spec, const BinPrecomp& pre) {
    BinTrainStat st;
    st.id = pre.bin_id;
    st.anchor_points = static_cast<int>(spec.anchor_idx.size());
    st.near_points = static_cast<int>(pre.near_pt_idx.size());
    st.near_rows = static_cast<int>(pre.S_inv.rows());
    st.far_rows = static_cast<int>(spec.far_rows.size());
    st.solver_iterations = pre.solver_iterations;
    st.solver_residual = pre.solver_residual;
    return st;
}

void log_bin(std::ostream* log, const BinTrainStat& st) {
    if (!log) return;
    (*log) << "[train] bin " << st.id << ": anchors=" << st.anchor_points
           << " near_pts=" << st.near_points << " near_rows=" << st.near_rows
           << " far_rows=" << st.far_rows << " iters=" << st.solver_iterations
           << " residual=" << st.solver_residual << "\n";
}

} // namespace

GenerateResult generate_to_file(const RunConfig& cfg, std::ostream* log) {
    const auto t0 = std::chrono::steady_clock::now();
    const SampleBounds bounds = cfg.bounds();
    const auto cases = generate_dataset(cfg.dataset.n_samples, cfg.dataset.seed, bounds,
                                        cfg.quad, cfg.dataset.gradients);
    DatasetHeader header;
    header.seed = cfg.dataset.seed;
    header.oracle_version = cfg.dataset.oracle;
    header.bounds = bounds;
    save_dataset(cfg.paths.dataset, header, cases);

    GenerateResult res;
    res.header = header;
    res.n_cases = static_cast<int>(cases.size());
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log) {
        (*log) << "[generate] n=" << res.n_cases << " seed=" << header.seed
               << " gradients=" << (cfg.dataset.gradients == GradientMode::fd ? "fd" : "analytic")
               << " -> " << cfg.paths.dataset << " (" << res.seconds << "s)\n";
    }
    return res;
}

TrainResult train_to_file(const RunConfig& cfg, const std::vector<RawCase>& cases,
                          std::ostream* log) {
    const auto t0 = std::chrono::steady_clock::now();

    const TrainingSet ts = normalize_dataset(cases, cfg.quad, cfg.kernel_noise_scale);
    const KernelParams p = cfg.kernel_params(ts.lambda2);

    std::vector<BinSpec> bins = build_bins(ts.X_tilde, cfg.partition);
    double eps = cfg.partition.eps;
    if (cfg.partition.target_near_size > 0)
        eps = derive_eps(ts.X_tilde, bins, p, cfg.partition.target_near_size);
    classify_all_bins(bins, ts.X_tilde, p, eps, ts.layout);

    TrainResult res;
    res.eps_used = eps;
    res.meta.kernel = p;
    res.meta.grad_dims = ts.grad_dims;
    res.meta.with_schur = cfg.train.with_schur;
    res.meta.eps = eps;
    res.meta.seed = cfg.seed;
    res.meta.n_train = static_cast<int>(cases.size());
    res.meta.oracle_version = cfg.dataset.oracle;
    res.meta.stats = ts.stats;
    res.meta.quad = cfg.quad;
    res.meta.centroids.resize(static_cast<Eigen::Index>(bins.size()), kStateDim);
    for (const auto& bin : bins) res.meta.centroids.row(bin.id) = bin.centroid;

    ArtifactWriter writer(cfg.paths.artifact, res.meta);

    PrecompOptions opt;
    opt.mode = cfg.solver.mode;
    opt.solver_tol = cfg.solver.tol;
    opt.max_iters = cfg.solver.max_iters;
    opt.with_schur = cfg.train.with_schur;
    opt.log = log;

    const int n_bins = static_cast<int>(bins.size());
    if (cfg.train.global_inverse) {
        precompute_all_bins_global(bins, p, ts.X_tilde, ts.grad_dims, ts.Y_rows, log,
                                   [&](BinPrecomp&& pre) {
                                       const BinTrainStat st =
                                           stat_from(bins[static_cast<size_t>(pre.bin_id)], pre);
                                       res.bins.push_back(st);
                                       log_bin(log, st);
                                       writer.add_bin(pre);
                                   });
    } else if (cfg.threads <= 1 || n_bins == 1) {
        for (const auto& bin : bins) {
            BinPrecomp pre = precompute_bin(bin, p, ts.X_tilde, ts.grad_dims, ts.Y_rows, opt);
            const BinTrainStat st = stat_from(bin, pre);
            res.bins.push_back(st);
            log_bin(log, st);
            writer.add_bin(pre);
        }
    } else {
        // per-bin precomputes run concurrently, writes stay in id order; the
        // buffer bound keeps at most `threads` finished bins in memory
        std::mutex mu;
        std::condition_variable cv_done, cv_space;
        std::map<int, BinPrecomp> done;
        int next_claim = 0;
        std::exception_ptr error;

        const int n_workers = std::min(cfg.threads, n_bins);
        std::vector<std::thread> workers;
        workers.reserve(static_cast<size_t>(n_workers));
        for (int w = 0; w < n_workers; ++w) {
            workers.emplace_back([&] {
                for (;;) {
                    int idx;
                    {
                        std::unique_lock<std::mutex> lk(mu);
                        cv_space.wait(lk, [&] {
                            return error || next_claim >= n_bins ||
                                   static_cast<int>(done.size()) < cfg.threads;
                        });
                        if (error || next_claim >= n_bins) return;
                        idx = next_claim++;
                    }
                    try {
                        BinPrecomp pre = precompute_bin(bins[static_cast<size_t>(idx)], p,
                                                        ts.X_tilde, ts.grad_dims, ts.Y_rows, opt);
                        std::lock_guard<std::mutex> lk(mu);
                        done.emplace(idx, std::move(pre));
                        cv_done.notify_all();
                    } catch (...) {
                        std::lock_guard<std::mutex> lk(mu);
                        if (!error) error = std::current_exception();
                        cv_done.notify_all();
                        cv_space.notify_all();
                        return;
                    }
                }
            });
        }

        for (int next_write = 0; next_write < n_bins; ++next_write) {
            BinPrecomp pre;
            {
                std::unique_lock<std::mutex> lk(mu);
                cv_done.wait(lk, [&] { return error || done.count(next_write); });
                if (error) break;
                pre = std::move(done.at(next_write));
                done.erase(next_write);
                cv_space.notify_all();
            }
            const BinTrainStat st = stat_from(bins[static_cast<size_t>(next_write)], pre);
            res.bins.push_back(st);
            log_bin(log, st);
            writer.add_bin(pre);
        }
        for (auto& t : workers) t.join();
        if (error) std::rethrow_exception(error);
    }

    writer.finish();
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log) {
        (*log) << "[train] " << n_bins << " bins, eps=" << eps << " -> " << cfg.paths.artifact
               << " (" << res.seconds << "s)\n";
    }
    return res;
}

PredictStats predict_stream(const SurrogateModel& model, std::istream& in, std::ostream& out,
                            std::ostream* warnings) {
    PredictStats stats;
    std::vector<double> lat_ms;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            WorldQuery q;
            const auto& r = j.at("r");
            const auto& v = j.at("v");
            if (!r.is_array() || r.size() != 4) throw std::invalid_argument("r must be 4 numbers");
            if (!v.is_array() || v.size() != 3) throw std::invalid_argument("v must be 3 numbers");
            for (int i = 0; i < 4; ++i) q.rotor_rpm[i] = r[static_cast<size_t>(i)].get<double>();
            q.psi = j.at("psi").get<double>() * kDegToRad;
            q.theta = j.at("theta").get<double>() * kDegToRad;
            q.phi = j.at("phi").get<double>() * kDegToRad;
            for (int i = 0; i < 3; ++i) q.v_world[i] = v[static_cast<size_t>(i)].get<double>();

            const Prediction pred = model.query(q);

            nlohmann::json o;
            o["mean"] = std::vector<double>(pred.mean.data(), pred.mean.data() + 9);
            o["std"] = std::vector<double>(pred.std.data(), pred.std.data() + 9);
            o["bin_id"] = pred.bin_id;
            o["latency_ns"] = pred.latency_ns;
            o["extrapolation"] = pred.extrapolation;
            o["det_aligned"] = pred.det_aligned;
            out << o.dump() << "\n";

            lat_ms.push_back(static_cast<double>(pred.latency_ns) / 1e6);
            ++stats.n_ok;
        } catch (const std::exception& e) {
            ++stats.n_failed;
            if (warnings)
                (*warnings) << "[predict] line " << lineno << " skipped: " << e.what() << "\n";
        }
    }
    stats.median_ms = percentile_ms(lat_ms, 0.5);
    stats.p95_ms = percentile_ms(lat_ms, 0.95);
    return stats;
}

} // namespace ggps
