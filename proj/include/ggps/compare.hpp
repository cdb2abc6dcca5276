#pragma once

#include <array>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "ggps/config.hpp"
#include "ggps/data_pipeline.hpp"

// Variant comparison: the dense and partitioned GP flavors trained on one
// dataset and scored on an independently generated test set, in physical
// units (model wrench added back). Produces the report CSV rows, pairwise
// bootstrap claims, and the dense-vs-partitioned equivalence gap that serves
// as a standing regression gate.
//
// Variants:
//   GP         dense, values only
//   GP-G       dense, values + gradients
//   GP-S-1X    partitioned, values only, same points
//   GP-S-8X    partitioned, values only, 8x points (independently generated)
//   GP-G-S     partitioned, values + gradients, far-set correction
//   GP-G-S-NS  same, correction disabled
//
// A variant whose projected working set exceeds compare.mem_budget_mb is
// skipped and reported as such, never silently dropped.

namespace ggps {

struct ReportRow {
    std::string variant;
    int output_dim = 0; // -1 marks a skipped variant
    double median_abs_err = std::numeric_limits<double>::quiet_NaN();
    double p95_abs_err = std::numeric_limits<double>::quiet_NaN();
    double train_s = std::numeric_limits<double>::quiet_NaN();
    double predict_ms_median = std::numeric_limits<double>::quiet_NaN();
};

// Bootstrap comparison of per-output median absolute errors between a
// variant expected to be better and its baseline.
struct PairwiseClaim {
    std::string better;
    std::string worse;
    bool available = false;       // both variants produced errors
    int wins = 0;                 // outputs where the full-sample median is lower
    int confident_wins = 0;       // outputs where >= 95% of resamples agree
    std::array<double, 9> confidence{}; // per-output fraction of agreeing resamples
    std::array<double, 9> ratio{};      // median(better) / median(worse), full sample
    double worst_ratio = 0.0;     // max of ratio
};

struct CompareResult {
    std::vector<ReportRow> rows;
    std::vector<std::string> skipped; // "variant: reason"

    std::map<std::string, Eigen::MatrixXd> abs_err; // variant -> n_test x 9
    std::map<std::string, double> train_s;
    std::map<std::string, double> predict_ms;

    PairwiseClaim grad_vs_plain;    // GP-G vs GP
    PairwiseClaim gs_vs_s1x;        // GP-G-S vs GP-S-1X
    PairwiseClaim schur_vs_noschur; // GP-G-S vs GP-G-S-NS

    // mean |dense - partitioned| over the gate's query block (single bin,
    // all-near classification); the standing requirement is < 1e-8
    double equivalence_gap = std::numeric_limits<double>::quiet_NaN();
};

PairwiseClaim bootstrap_pair(const std::string& better_name, const Eigen::MatrixXd& err_better,
                             const std::string& worse_name, const Eigen::MatrixXd& err_worse,
                             int n_resamples, std::uint64_t seed);

CompareResult run_compare(const RunConfig& cfg, const std::vector<RawCase>& train_cases,
                          std::ostream* log = nullptr);

// Header row plus one line per ReportRow, numbers at full precision.
void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows);

} // namespace ggps
