#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "ggps/data_pipeline.hpp"
#include "ggps/partition.hpp"
#include "ggps/quad_model.hpp"
#include "ggps/schur.hpp"

// Run configuration: a single flat key = value file (TOML-style scalars,
// dotted key names, # comments, quoted or bare strings). Every key has a
// default, listed in config_schema(); unknown or duplicate keys are
// rejected so typos cannot silently fall back to defaults. Command-line
// flags are merged on top of the file before validation, so they override
// file keys uniformly.
//
// Angles cross this boundary in degrees; everything downstream is radians.

namespace ggps {

// Malformed syntax, unknown keys, or out-of-range values. CLI maps this to
// the validation exit code.
class ConfigError : public std::invalid_argument {
  public:
    explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct DatasetConfig {
    int n_samples = 1000;
    std::uint64_t seed = 0;            // resolved against the top-level seed
    std::string oracle = "synth-v2";
    GradientMode gradients = GradientMode::fd;
    // sampling box, symmetric in the angles
    double rpm_min = 0.0;
    double rpm_max = 7000.0;
    double yaw_deg = 90.0;
    double pitch_deg = 60.0;
    double roll_deg = 90.0;
    double v_min = 0.0;
    double v_max = 20.0;
};

struct SolverConfig {
    SolverMode mode = SolverMode::direct; // cg is available but slow with many
                                          // right-hand sides; offline use only
    double tol = 1e-8;
    int max_iters = 0;        // <= 0: solver default cap
};

struct TrainConfig {
    bool with_schur = true;   // false: per-bin inverse ignores the far set
    bool global_inverse = false; // one packed global inverse instead of per-bin solves
};

struct BenchConfig {
    int n_queries = 200;
    int warmup = 16;
    std::uint64_t seed = 0;   // resolved against the top-level seed
};

struct CompareConfig {
    int n_test = 1000;
    int bootstrap = 2000;
    int timing_queries = 64;  // per-variant timing subsample
    int mem_budget_mb = 3000; // variants projected to exceed this are skipped
};

struct PathsConfig {
    std::string dataset = "dataset.jsonl";
    std::string artifact = "model.ggps";
    std::string report = "report.csv";
    std::string queries = "queries.jsonl";
    std::string predictions = "predictions.jsonl";
};

struct RunConfig {
    double kernel_sigma = 1.0;
    double kernel_length_scale = 0.5;
    double kernel_jitter = 1e-10;
    double kernel_noise_scale = 0.3;  // s in lambda^2 = s * Var(normalized gradients)

    PartitionConfig partition;        // partition.seed resolved against the top-level seed
    DatasetConfig dataset;
    QuadParams quad;                  // built via QuadParams::calibrated
    SolverConfig solver;
    TrainConfig train;
    BenchConfig bench;
    CompareConfig compare;
    PathsConfig paths;

    std::uint64_t seed = 0;
    int threads = 1;                  // offline phases only

    // Derived views, validated on construction.
    SampleBounds bounds() const;
    KernelParams kernel_params(const Eigen::VectorXd& lambda2) const;
};

// Raw pairs in file order. Throws ConfigError on syntax errors (with line
// number) and duplicate keys.
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Assembles a RunConfig from key-value pairs: unknown keys rejected, every
// value parsed and range-checked, seed fallbacks resolved last.
RunConfig build_config(const std::map<std::string, std::string>& kv);

// File plus command-line overrides (overrides win key-by-key). An empty path
// yields pure defaults plus overrides.
RunConfig load_config(const std::string& path,
                      const std::map<std::string, std::string>& overrides = {});

// One line per key: name, default, description. The documented schema.
std::string config_schema();

} // namespace ggps
