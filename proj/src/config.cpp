#include "ggps/config.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace ggps {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& raw) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(raw.c_str(), &end);
    if (end != raw.c_str() + raw.size() || raw.empty() || errno == ERANGE || !std::isfinite(v))
        throw ConfigError("key " + key + ": expected a finite number, got '" + raw + "'");
    return v;
}

long long parse_ll(const std::string& key, const std::string& raw) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(raw.c_str(), &end, 10);
    if (end != raw.c_str() + raw.size() || raw.empty() || errno == ERANGE)
        throw ConfigError("key " + key + ": expected an integer, got '" + raw + "'");
    return v;
}

int parse_int(const std::string& key, const std::string& raw, long long lo, long long hi) {
    const long long v = parse_ll(key, raw);
    if (v < lo || v > hi)
        throw ConfigError("key " + key + ": value " + raw + " outside [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
    if (!raw.empty() && raw[0] == '-')
        throw ConfigError("key " + key + ": seed must be nonnegative, got '" + raw + "'");
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(raw.c_str(), &end, 10);
    if (end != raw.c_str() + raw.size() || raw.empty() || errno == ERANGE)
        throw ConfigError("key " + key + ": expected an unsigned integer, got '" + raw + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& raw) {
    if (raw == "true") return true;
    if (raw == "false") return false;
    throw ConfigError("key " + key + ": expected true or false, got '" + raw + "'");
}

double parse_positive(const std::string& key, const std::string& raw) {
    const double v = parse_double(key, raw);
    if (!(v > 0.0)) throw ConfigError("key " + key + ": must be > 0, got '" + raw + "'");
    return v;
}

double parse_nonneg(const std::string& key, const std::string& raw) {
    const double v = parse_double(key, raw);
    if (!(v >= 0.0)) throw ConfigError("key " + key + ": must be >= 0, got '" + raw + "'");
    return v;
}

std::string parse_path(const std::string& key, const std::string& raw) {
    if (raw.empty()) throw ConfigError("key " + key + ": path must not be empty");
    return raw;
}

// Raw quad parameters staged until finalize, where the calibrated constructor
// validates the combination as a whole.
struct Builder {
    RunConfig cfg;
    // the library-level PartitionConfig defaults to a single bin; the CLI
    // schema documents a partitioned default
    Builder() { cfg.partition.n_bins = 8; }
    double quad_mass = 2.6;
    double quad_g = 9.81;
    double quad_lx = 0.2;
    double quad_ly = 0.2;
    double quad_hover_rpm = 3500.0;
    double quad_tz_factor = 0.01;
};

struct KeyDef {
    const char* key;
    const char* def;
    const char* doc;
    std::function<void(Builder&, const std::string&, const std::string&)> set;
};

const std::vector<KeyDef>& key_table() {
    static const std::vector<KeyDef> t = {
        {"seed", "0", "master seed; dataset.seed, partition.seed and bench.seed fall back to it",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.seed = parse_u64(k, v); }},
        {"threads", "1", "worker threads for offline phases (train, compare)",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.threads = parse_int(k, v, 1, 1024); }},

        {"kernel.sigma", "1.0", "RBF signal variance (normalized output units)",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.kernel_sigma = parse_positive(k, v); }},
        {"kernel.length_scale", "0.5", "RBF length scale (normalized input units)",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.kernel_length_scale = parse_positive(k, v); }},
        {"kernel.jitter", "1e-10", "nugget added to value-row diagonal",
         [](Builder& b, const std::string& k, const std::string& v) {
             b.cfg.kernel_jitter = parse_nonneg(k, v);
             if (b.cfg.kernel_jitter > 1e-3)
                 throw ConfigError("key " + k + ": jitter above 1e-3 would swamp the kernel");
         }},
        {"kernel.noise_scale", "0.3", "s in lambda^2 = s * Var(normalized gradients)",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.kernel_noise_scale = parse_positive(k, v); }},

        {"partition.n_bins", "8", "number of k-means bins",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.partition.n_bins = parse_int(k, v, 1, 100000); }},
        {"partition.eps", "1e-3", "near/far correlation cutoff, in (0, 1)",
         [](Builder& b, const std::string& k, const std::string& v) {
             b.cfg.partition.eps = parse_double(k, v);
             if (!(b.cfg.partition.eps > 0.0 && b.cfg.partition.eps < 1.0))
                 throw ConfigError("key " + k + ": eps must lie in (0, 1), got '" + v + "'");
         }},
        {"partition.target_near", "0", "approximate near-set size in points; 0 keeps eps as given",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.partition.target_near_size = parse_int(k, v, 0, 10000000); }},
        {"partition.seed", "(seed)", "k-means seed; defaults to the master seed",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.partition.seed = parse_u64(k, v); }},

        {"dataset.n_samples", "1000", "Latin-hypercube training samples",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.dataset.n_samples = parse_int(k, v, 2, 100000000); }},
        {"dataset.seed", "(seed)", "sampling seed; defaults to the master seed",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.dataset.seed = parse_u64(k, v); }},
        {"dataset.oracle", "synth-v2", "synthetic data generator version",
         [](Builder& b, const std::string& k, const std::string& v) {
             if (v != kOracleVersion)
                 throw ConfigError("key " + k + ": unsupported oracle '" + v + "' (only " +
                                   std::string(kOracleVersion) + ")");
             b.cfg.dataset.oracle = v;
         }},
        {"dataset.gradients", "fd", "gradient source: fd (one-sided differences) or analytic",
         [](Builder& b, const std::string& k, const std::string& v) {
             if (v == "fd") b.cfg.dataset.gradients = GradientMode::fd;
             else if (v == "analytic") b.cfg.dataset.gradients = GradientMode::analytic;
             else throw ConfigError("key " + k + ": expected fd or analytic, got '" + v + "'");
         }},
        {"dataset.rpm_min", "0", "rotor speed lower bound, rpm",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.dataset.rpm_min = parse_nonneg(k, v); }},
        {"dataset.rpm_max", "7000", "rotor speed upper bound, rpm",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.dataset.rpm_max = parse_positive(k, v); }},
        {"dataset.yaw_deg", "90", "yaw sampled over +-this, degrees",
         [](Builder& b, const std::string& k, const std::string& v) {
             b.cfg.dataset.yaw_deg = parse_positive(k, v);
             if (b.cfg.dataset.yaw_deg > 180.0) throw ConfigError("key " + k + ": must be <= 180");
         }},
        {"dataset.pitch_deg", "60", "pitch sampled over +-this, degrees (< 89 keeps the Euler chart regular)",
         [](Builder& b, const std::string& k, const std::string& v) {
             b.cfg.dataset.pitch_deg = parse_positive(k, v);
             if (b.cfg.dataset.pitch_deg >= 89.0) throw ConfigError("key " + k + ": must be < 89");
         }},
        {"dataset.roll_deg", "90", "roll sampled over +-this, degrees",
         [](Builder& b, const std::string& k, const std::string& v) {
             b.cfg.dataset.roll_deg = parse_positive(k, v);
             if (b.cfg.dataset.roll_deg > 180.0) throw ConfigError("key " + k + ": must be <= 180");
         }},
        {"dataset.v_min", "0", "airspeed lower bound, m/s",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.dataset.v_min = parse_nonneg(k, v); }},
        {"dataset.v_max", "20", "airspeed upper bound, m/s",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.dataset.v_max = parse_positive(k, v); }},

        {"quad.mass", "2.6", "vehicle mass, kg",
         [](Builder& b, const std::string& k, const std::string& v) { b.quad_mass = parse_positive(k, v); }},
        {"quad.g", "9.81", "gravitational acceleration, m/s^2",
         [](Builder& b, const std::string& k, const std::string& v) { b.quad_g = parse_positive(k, v); }},
        {"quad.l_x", "0.2", "rotor arm x offset, m",
         [](Builder& b, const std::string& k, const std::string& v) { b.quad_lx = parse_positive(k, v); }},
        {"quad.l_y", "0.2", "rotor arm y offset, m",
         [](Builder& b, const std::string& k, const std::string& v) { b.quad_ly = parse_positive(k, v); }},
        {"quad.hover_rpm", "3500", "rotor speed that balances gravity, rpm",
         [](Builder& b, const std::string& k, const std::string& v) { b.quad_hover_rpm = parse_positive(k, v); }},
        {"quad.t_z_factor", "0.01", "yaw-torque coefficient as a fraction of the thrust coefficient",
         [](Builder& b, const std::string& k, const std::string& v) { b.quad_tz_factor = parse_positive(k, v); }},

        {"solver.mode", "direct", "far-set solver: direct or cg",
         [](Builder& b, const std::string& k, const std::string& v) {
             if (v == "cg") b.cfg.solver.mode = SolverMode::cg;
             else if (v == "direct") b.cfg.solver.mode = SolverMode::direct;
             else throw ConfigError("key " + k + ": expected cg or direct, got '" + v + "'");
         }},
        {"solver.tol", "1e-8", "iterative solver residual tolerance",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.solver.tol = parse_positive(k, v); }},
        {"solver.max_iters", "0", "iteration cap; 0 uses the solver default",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.solver.max_iters = parse_int(k, v, 0, 100000000); }},

        {"train.with_schur", "true", "apply the far-set correction to each bin's inverse",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.train.with_schur = parse_bool(k, v); }},
        {"train.global_inverse", "false", "derive all bins from one packed global inverse instead of per-bin solves",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.train.global_inverse = parse_bool(k, v); }},

        {"bench.n_queries", "200", "timed queries per bench run",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.bench.n_queries = parse_int(k, v, 1, 100000000); }},
        {"bench.warmup", "16", "untimed warmup queries",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.bench.warmup = parse_int(k, v, 0, 100000000); }},
        {"bench.seed", "(seed)", "query-draw seed; defaults to the master seed",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.bench.seed = parse_u64(k, v); }},

        {"compare.n_test", "1000", "held-out test points for the variant comparison",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.compare.n_test = parse_int(k, v, 1, 100000000); }},
        {"compare.bootstrap", "2000", "bootstrap resamples behind the error-ordering claims",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.compare.bootstrap = parse_int(k, v, 1, 100000000); }},
        {"compare.timing_queries", "64", "queries in each variant's timing subsample",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.compare.timing_queries = parse_int(k, v, 1, 100000000); }},
        {"compare.mem_budget_mb", "3000", "variants whose projected working set exceeds this are skipped",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.compare.mem_budget_mb = parse_int(k, v, 1, 1000000); }},

        {"paths.dataset", "dataset.jsonl", "training dataset file",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.paths.dataset = parse_path(k, v); }},
        {"paths.artifact", "model.ggps", "trained model artifact",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.paths.artifact = parse_path(k, v); }},
        {"paths.report", "report.csv", "comparison report CSV",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.paths.report = parse_path(k, v); }},
        {"paths.queries", "queries.jsonl", "prediction input stream",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.paths.queries = parse_path(k, v); }},
        {"paths.predictions", "predictions.jsonl", "prediction output stream",
         [](Builder& b, const std::string& k, const std::string& v) { b.cfg.paths.predictions = parse_path(k, v); }},
    };
    return t;
}

} // namespace

SampleBounds RunConfig::bounds() const {
    SampleBounds b;
    b.lo.resize(kStateDim);
    b.hi.resize(kStateDim);
    for (int r = 0; r < 4; ++r) {
        b.lo[r] = dataset.rpm_min;
        b.hi[r] = dataset.rpm_max;
    }
    b.lo[4] = -dataset.yaw_deg * kDegToRad;
    b.hi[4] = dataset.yaw_deg * kDegToRad;
    b.lo[5] = -dataset.pitch_deg * kDegToRad;
    b.hi[5] = dataset.pitch_deg * kDegToRad;
    b.lo[6] = -dataset.roll_deg * kDegToRad;
    b.hi[6] = dataset.roll_deg * kDegToRad;
    b.lo[7] = dataset.v_min;
    b.hi[7] = dataset.v_max;
    if (!(dataset.rpm_max > dataset.rpm_min))
        throw ConfigError("key dataset.rpm_max: must exceed dataset.rpm_min");
    if (!(dataset.v_max > dataset.v_min))
        throw ConfigError("key dataset.v_max: must exceed dataset.v_min");
    b.validate();
    return b;
}

KernelParams RunConfig::kernel_params(const Eigen::VectorXd& lambda2) const {
    KernelParams p;
    p.sigma = kernel_sigma;
    p.length_scale = kernel_length_scale;
    p.jitter = kernel_jitter;
    p.grad_noise = lambda2;
    p.validate(static_cast<int>(lambda2.size()));
    return p;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // strip comments outside quotes
        bool quoted = false;
        std::string clean;
        for (char c : line) {
            if (c == '"') quoted = !quoted;
            if (c == '#' && !quoted) break;
            clean += c;
        }
        clean = trim(clean);
        if (clean.empty()) continue;

        const size_t eq = clean.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(clean.substr(0, eq));
        std::string val = trim(clean.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        for (char c : key) {
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '_')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": bad character in key '" + key + "'");
        }
        if (val.size() >= 2 && val.front() == '"' && val.back() == '"')
            val = val.substr(1, val.size() - 2);
        if (val.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty value for '" +
                              key + "'");
        if (!kv.emplace(key, val).second)
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" +
                              key + "'");
    }
    return kv;
}

RunConfig build_config(const std::map<std::string, std::string>& kv) {
    Builder b;
    for (const auto& [key, val] : kv) {
        const KeyDef* def = nullptr;
        for (const auto& d : key_table()) {
            if (key == d.key) {
                def = &d;
                break;
            }
        }
        if (!def) throw ConfigError("unknown config key '" + key + "'");
        def->set(b, key, val);
    }

    // seed fallbacks apply only when the specific key was not given
    if (!kv.count("dataset.seed")) b.cfg.dataset.seed = b.cfg.seed;
    if (!kv.count("partition.seed")) b.cfg.partition.seed = b.cfg.seed;
    if (!kv.count("bench.seed")) b.cfg.bench.seed = b.cfg.seed;

    if (b.cfg.train.global_inverse && !b.cfg.train.with_schur)
        throw ConfigError("train.global_inverse requires train.with_schur: the uncorrected "
                          "variant has no global shortcut");

    try {
        b.cfg.quad = QuadParams::calibrated(b.quad_mass, b.quad_g, b.quad_lx, b.quad_ly,
                                            b.quad_hover_rpm, b.quad_tz_factor);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("quad.*: ") + e.what());
    }
    (void)b.cfg.bounds(); // range coherence across keys
    return b.cfg;
}

RunConfig load_config(const std::string& path,
                      const std::map<std::string, std::string>& overrides) {
    std::map<std::string, std::string> kv;
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f.good()) throw ConfigError("cannot open config file '" + path + "'");
        std::ostringstream ss;
        ss << f.rdbuf();
        kv = parse_config_text(ss.str());
    }
    for (const auto& [k, v] : overrides) kv[k] = v;
    return build_config(kv);
}

std::string config_schema() {
    std::ostringstream out;
    for (const auto& d : key_table()) {
        out << d.key << " = " << d.def << "\n    " << d.doc << "\n";
    }
    return out.str();
}

} // namespace ggps
