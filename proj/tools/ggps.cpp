#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ggps/bench.hpp"
#include "ggps/compare.hpp"
#include "ggps/config.hpp"
#include "ggps/errors.hpp"
#include "ggps/pipeline.hpp"

// Command-line front end: generate / train / predict / bench / compare.
// Exit codes: 0 success, 1 runtime failure, 2 validation failure.
// Angles are degrees in config values, query files and console output;
// everything behind the config boundary runs in radians.

namespace {

constexpr double kRadToDeg = 180.0 / M_PI;

struct CommonFlags {
    std::string config_path;
    std::vector<std::string> sets;
    bool has_seed = false;
    std::uint64_t seed = 0;
    bool has_threads = false;
    int threads = 1;
    std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f, const std::string& out_doc) {
    cmd->add_option("--config", f.config_path, "config file (key = value lines)");
    cmd->add_option("--seed", f.seed, "override the master seed")->trigger_on_parse(false);
    cmd->add_option("--threads", f.threads, "override worker threads (offline phases only)");
    if (!out_doc.empty()) cmd->add_option("--out", f.out, out_doc);
    cmd->add_option("--set", f.sets, "override any config key, e.g. --set partition.n_bins=4")
        ->take_all();
}

// The flag layer only builds an override map; load_config applies it on top
// of the file so precedence is uniform.
ggps::RunConfig config_from(const CLI::App* cmd, const CommonFlags& f,
                            const std::string& out_key) {
    std::map<std::string, std::string> ov;
    for (const auto& kv : f.sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw ggps::ConfigError("--set expects key=value, got '" + kv + "'");
        ov[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    if (cmd->count("--seed")) ov["seed"] = std::to_string(f.seed);
    if (cmd->count("--threads")) ov["threads"] = std::to_string(f.threads);
    if (!out_key.empty() && cmd->count("--out")) ov[out_key] = f.out;
    return ggps::load_config(f.config_path, ov);
}

int cmd_generate(const ggps::RunConfig& cfg) {
    const auto res = ggps::generate_to_file(cfg, &std::cout);
    const auto& b = res.header.bounds;
    std::cout << "wrote " << res.n_cases << " cases to " << cfg.paths.dataset << "\n"
              << "  seed " << res.header.seed << ", oracle " << res.header.oracle_version << "\n"
              << "  rpm [" << b.lo[0] << ", " << b.hi[0] << "]"
              << "  yaw +-" << b.hi[4] * kRadToDeg << " deg"
              << "  pitch +-" << b.hi[5] * kRadToDeg << " deg"
              << "  roll +-" << b.hi[6] * kRadToDeg << " deg"
              << "  airspeed [" << b.lo[7] << ", " << b.hi[7] << "] m/s\n"
              << "  took " << res.seconds << "s\n";
    return 0;
}

int cmd_train(const ggps::RunConfig& cfg) {
    const auto ds = ggps::load_dataset(cfg.paths.dataset);
    if (ds.header.oracle_version != cfg.dataset.oracle)
        throw ggps::ConfigError("dataset oracle '" + ds.header.oracle_version +
                                "' does not match config '" + cfg.dataset.oracle + "'");
    const auto res = ggps::train_to_file(cfg, ds.cases, &std::cout);
    std::cout << "trained " << res.bins.size() << " bins on " << ds.cases.size()
              << " cases -> " << cfg.paths.artifact << " (eps " << res.eps_used << ", "
              << res.seconds << "s)\n";
    return 0;
}

int cmd_predict(const ggps::RunConfig& cfg) {
    const auto model = ggps::SurrogateModel::load(cfg.paths.artifact);

    std::ifstream fin;
    std::istream* in = &std::cin;
    if (cfg.paths.queries != "-") {
        fin.open(cfg.paths.queries);
        if (!fin.good())
            throw std::runtime_error("cannot open queries file '" + cfg.paths.queries + "'");
        in = &fin;
    }
    std::ofstream fout;
    std::ostream* out = &std::cout;
    if (cfg.paths.predictions != "-") {
        fout.open(cfg.paths.predictions);
        if (!fout.good())
            throw std::runtime_error("cannot open predictions file '" + cfg.paths.predictions +
                                     "'");
        out = &fout;
    }

    const auto stats = ggps::predict_stream(model, *in, *out, &std::cerr);
    std::cout << "predicted " << stats.n_ok << " queries (" << stats.n_failed
              << " skipped), latency median " << stats.median_ms << " ms, p95 " << stats.p95_ms
              << " ms\n";
    if (stats.n_ok == 0 && stats.n_failed > 0) {
        std::cerr << "every input line failed\n";
        return 1;
    }
    return 0;
}

int cmd_bench(const ggps::RunConfig& cfg, const std::string& out_path) {
    const auto model = ggps::SurrogateModel::load(cfg.paths.artifact);
    const auto r = ggps::run_bench(model, cfg.bench);
    std::ostringstream report;
    report << "bench: " << r.n_queries << " queries over " << model.n_bins() << " bins\n"
           << "  wall ms  min " << r.min_ms << "  median " << r.median_ms << "  p95 " << r.p95_ms
           << "  max " << r.max_ms << "\n"
           << "  total " << r.total_s << "s, peak rss " << r.peak_rss_kb << " kB\n";
    std::cout << report.str();
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        f << report.str();
    }
    return 0;
}

void print_claim(const ggps::PairwiseClaim& c) {
    std::cout << "  " << c.better << " vs " << c.worse << ": ";
    if (!c.available) {
        std::cout << "not evaluated (a side was skipped)\n";
        return;
    }
    std::cout << c.wins << "/9 outputs better, " << c.confident_wins
              << "/9 at 95% bootstrap confidence, worst ratio " << c.worst_ratio << "\n";
}

int cmd_compare(const ggps::RunConfig& cfg) {
    const auto ds = ggps::load_dataset(cfg.paths.dataset);
    const auto res = ggps::run_compare(cfg, ds.cases, &std::cout);
    ggps::write_report_csv(cfg.paths.report, res.rows);
    std::cout << "report -> " << cfg.paths.report << "\n";
    for (const auto& s : res.skipped) std::cout << "  skipped " << s << "\n";
    print_claim(res.grad_vs_plain);
    print_claim(res.gs_vs_s1x);
    print_claim(res.schur_vs_noschur);
    std::cout << "  dense-vs-partitioned equivalence gap " << res.equivalence_gap
              << " (gate 1e-8)\n";
    if (!(res.equivalence_gap < 1e-8)) {
        std::cerr << "equivalence gate violated: partitioned route no longer matches the dense "
                     "reference\n";
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"partitioned gradient-conditioned GP surrogate for quadrotor forces, torques "
                 "and sound levels"};
    app.require_subcommand(0, 1);

    bool show_schema = false;
    app.add_flag("--schema", show_schema, "print every config key with default and meaning");

    CommonFlags fg, ft, fp, fb, fc;
    CLI::App* generate = app.add_subcommand("generate", "sample the envelope and write a dataset");
    add_common(generate, fg, "dataset output path (overrides paths.dataset)");
    CLI::App* train = app.add_subcommand("train", "fit the partitioned model and write the artifact");
    add_common(train, ft, "artifact output path (overrides paths.artifact)");
    CLI::App* predict = app.add_subcommand("predict", "stream JSONL queries through a trained model");
    add_common(predict, fp, "predictions output path (overrides paths.predictions)");
    CLI::App* bench = app.add_subcommand("bench", "time random in-bounds queries against the artifact");
    add_common(bench, fb, "also write the bench summary to this file");
    CLI::App* compare = app.add_subcommand("compare", "score every model variant and write the report CSV");
    add_common(compare, fc, "report output path (overrides paths.report)");

    CLI11_PARSE(app, argc, argv);

    if (show_schema) {
        std::cout << ggps::config_schema();
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return 2;
    }

    try {
        if (generate->parsed()) return cmd_generate(config_from(generate, fg, "paths.dataset"));
        if (train->parsed()) return cmd_train(config_from(train, ft, "paths.artifact"));
        if (predict->parsed()) return cmd_predict(config_from(predict, fp, "paths.predictions"));
        if (bench->parsed()) return cmd_bench(config_from(bench, fb, ""), fb.out);
        if (compare->parsed()) return cmd_compare(config_from(compare, fc, "paths.report"));
    } catch (const ggps::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const ggps::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
