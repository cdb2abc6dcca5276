#include "ggps/bench.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include <sys/resource.h>

namespace ggps {

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace

std::vector<WorldQuery> draw_bench_queries(const ArtifactMeta& meta, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<WorldQuery> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Eigen::Matrix<double, 8, 1> x;
        for (int c = 0; c < kStateDim; ++c) {
            const double lo = meta.stats.x_min[c];
            const double hi = meta.stats.x_max[c];
            x[c] = lo + (hi - lo) * uniform01(rng);
        }
        WorldQuery q;
        q.rotor_rpm = x.head<4>();
        q.psi = x[4];
        q.theta = x[5];
        q.phi = x[6];
        q.v_world = Eigen::Vector3d(x[7], 0.0, 0.0);
        out.push_back(q);
    }
    return out;
}

BenchResult run_bench(const SurrogateModel& model, const BenchConfig& cfg) {
    const auto queries =
        draw_bench_queries(model.meta(), cfg.warmup + cfg.n_queries, cfg.seed);

    for (int i = 0; i < cfg.warmup; ++i) (void)model.query(queries[static_cast<size_t>(i)]);

    std::vector<double> ms;
    ms.reserve(static_cast<size_t>(cfg.n_queries));
    const auto run0 = std::chrono::steady_clock::now();
    for (int i = 0; i < cfg.n_queries; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        (void)model.query(queries[static_cast<size_t>(cfg.warmup + i)]);
        const auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    const auto run1 = std::chrono::steady_clock::now();

    std::sort(ms.begin(), ms.end());
    auto at = [&ms](double q) {
        const size_t idx = static_cast<size_t>(q * (static_cast<double>(ms.size()) - 1.0) + 0.5);
        return ms[std::min(idx, ms.size() - 1)];
    };

    BenchResult r;
    r.n_queries = cfg.n_queries;
    r.min_ms = ms.front();
    r.median_ms = at(0.5);
    r.p95_ms = at(0.95);
    r.max_ms = ms.back();
    r.total_s = std::chrono::duration<double>(run1 - run0).count();

    rusage ru{};
    getrusage(RUSAGE_SELF, &ru);
    r.peak_rss_kb = ru.ru_maxrss;
    return r;
}

} // namespace ggps
