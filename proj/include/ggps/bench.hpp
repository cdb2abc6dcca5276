#pragma once

#include <cstdint>
#include <vector>

#include "ggps/config.hpp"
#include "ggps/runtime.hpp"

// Single-lane query benchmark against a loaded model: a fixed warmup, then
// n timed queries drawn uniformly inside the model's training envelope.
// The draw is a pure function of the seed, so two runs against the same
// artifact time the same query sequence.

namespace ggps {

struct BenchResult {
    int n_queries = 0;
    double min_ms = 0.0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
    double max_ms = 0.0;
    double total_s = 0.0;
    long peak_rss_kb = 0; // ru_maxrss after the run
};

// In-bounds world queries: the aligned state is sampled inside
// [x_min, x_max] and embedded with the airspeed along +x.
std::vector<WorldQuery> draw_bench_queries(const ArtifactMeta& meta, int n, std::uint64_t seed);

BenchResult run_bench(const SurrogateModel& model, const BenchConfig& cfg);

} // namespace ggps
