#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ggps/artifact.hpp"
#include "ggps/config.hpp"
#include "ggps/dataset_io.hpp"
#include "ggps/runtime.hpp"

// Offline orchestration: dataset generation and model training, plus the
// streaming prediction loop the CLI wraps. Everything here is deterministic
// for a fixed config; parallel training changes scheduling, never bytes.

namespace ggps {

// Stable per-purpose seed derivation so one master seed cannot reuse a
// stream across phases (dataset vs test set vs benchmark draws).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose) {
    return seed ^ (0x9E3779B97F4A7C15ull * (purpose + 1));
}

struct GenerateResult {
    DatasetHeader header;
    int n_cases = 0;
    double seconds = 0.0;
};

// Samples the configured envelope, evaluates the synthetic oracle, and
// writes the dataset to cfg.paths.dataset.
GenerateResult generate_to_file(const RunConfig& cfg, std::ostream* log = nullptr);

struct BinTrainStat {
    int id = 0;
    int anchor_points = 0;
    int near_points = 0;
    int near_rows = 0;
    int far_rows = 0;
    int solver_iterations = 0;
    double solver_residual = 0.0;
};

struct TrainResult {
    std::vector<BinTrainStat> bins;
    double eps_used = 0.0; // after any target-size derivation
    double seconds = 0.0;
    ArtifactMeta meta;
};

// Normalizes, partitions, precomputes every bin and streams the artifact to
// cfg.paths.artifact, one bin in memory at a time. cfg.threads > 1 runs the
// per-bin precomputes concurrently; bins are still written in id order so
// artifact bytes never depend on scheduling. Solver failures propagate as
// NumericalError naming the bin.
TrainResult train_to_file(const RunConfig& cfg, const std::vector<RawCase>& cases,
                          std::ostream* log = nullptr);

struct PredictStats {
    int n_ok = 0;
    int n_failed = 0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
};

// Streams one JSON query per input line through the model and writes one
// JSON prediction per line. Query angles arrive in degrees (file boundary),
// predictions carry world-frame means. Malformed or invalid lines are
// skipped and counted, with a note to `warnings` when given.
PredictStats predict_stream(const SurrogateModel& model, std::istream& in, std::ostream& out,
                            std::ostream* warnings = nullptr);

} // namespace ggps
