#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "knnsampler/datagen.hpp"
#include "knnsampler/evaluation.hpp"

namespace knnsampler {

// One full benchmark: for each (n, replicate) cell, generate n + m units,
// mask m of them, impute with every configured method, and score the imputed
// joint sample against the hidden truths.
struct BenchmarkConfig {
    SetupKind setup = SetupKind::linear_chisq;
    std::vector<std::size_t> n_grid{2800, 4800, 6800, 8800, 10800};
    MaskSpec mask{Mechanism::mar_window, 200, 0.5, 1.5};
    std::vector<MethodConfig> methods = default_methods();
    std::size_t replicates = 10;
    std::size_t n_permutations = 199;
    std::vector<double> coverage_levels{0.80, 0.90, 0.95};
    std::uint64_t master_seed = 0;

    // linear, kNN mean imputer (k = 5), kNNxKDE (tau 50, h 0.03), and the
    // sampler with LOOCV-selected k.
    static std::vector<MethodConfig> default_methods();
    void validate() const;
};

struct Aggregate {
    double mean = 0.0;
    std::optional<double> stddev; // absent when only one replicate ran
};

Aggregate aggregate(const std::vector<double>& values);

// Per-(setup, n, method) results across replicates.  Coverage is populated
// for the sampler only.  A failed replicate stores the error message and
// leaves the other cells untouched.
struct BenchmarkCell {
    std::string setup;
    std::size_t n = 0;
    std::string method;
    std::string k_policy; // "auto" or "fixed:<k>"
    std::size_t replicates_done = 0;
    std::vector<double> energy;
    std::vector<double> p_value;
    std::vector<double> rmse;
    std::vector<std::size_t> resolved_k;
    std::map<std::string, std::vector<double>> coverage; // "0.80" -> per-replicate rates
    std::optional<std::string> error;
    double wall_clock_seconds = 0.0; // total over replicates; exported only on request
};

struct BenchmarkReport {
    int schema_version = 1;
    BenchmarkConfig config;
    std::vector<BenchmarkCell> cells;
    std::vector<std::string> absent_by_design{"random_forest"};
};

BenchmarkReport run_benchmark(const BenchmarkConfig& config, int threads = 0);

enum class ReportFormat { json, csv };

// include_timings adds per-cell wall-clock to the JSON output; it is off by
// default so report bytes do not depend on machine speed or worker count.
void export_report(const BenchmarkReport& report, const std::string& path, ReportFormat format,
                   bool include_timings = false);

// Parses a JSON report written by export_report.
BenchmarkReport report_from_json_file(const std::string& path);

// JSON form used by both export and the round-trip loader.
std::string report_to_json_string(const BenchmarkReport& report, bool include_timings = false);

} // namespace knnsampler
