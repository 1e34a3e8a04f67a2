#include "knnsampler/benchmark.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "knnsampler/errors.hpp"
#include "knnsampler/imputers.hpp"
#include "knnsampler/parallel.hpp"
#include "knnsampler/selection.hpp"
#include "knnsampler/uncertainty.hpp"

namespace knnsampler {

namespace {

std::string level_label(double level) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    out << level;
    return out.str();
}

std::string mechanism_name(Mechanism mechanism) {
    return mechanism == Mechanism::mcar ? "mcar" : "mar_window";
}

Mechanism mechanism_from_name(const std::string& name) {
    if (name == "mcar") {
        return Mechanism::mcar;
    }
    if (name == "mar_window") {
        return Mechanism::mar_window;
    }
    throw ConfigError("unknown mask mechanism: " + name);
}

SetupKind setup_from_name(const std::string& name) {
    if (name == "linear_chisq") {
        return SetupKind::linear_chisq;
    }
    if (name == "noisy_ring") {
        return SetupKind::noisy_ring;
    }
    throw ConfigError("unknown setup: " + name);
}

// Outcome of one method on one (n, replicate) cell.
struct MethodOutcome {
    bool ok = false;
    std::string error;
    double energy = 0.0;
    double p_value = 0.0;
    double rmse_value = 0.0;
    std::size_t resolved_k = 0;
    std::vector<double> coverage; // aligned with config.coverage_levels
    double seconds = 0.0;
};

} // namespace

std::vector<MethodConfig> BenchmarkConfig::default_methods() {
    std::vector<MethodConfig> methods;
    methods.push_back(MethodConfig{Method::linear, std::nullopt, 0.0, 0.0});
    methods.push_back(MethodConfig{Method::knn_imputer, 5, 0.0, 0.0});
    methods.push_back(MethodConfig{Method::knn_kde, std::nullopt, 50.0, 0.03});
    methods.push_back(MethodConfig{Method::knn_sampler, std::nullopt, 0.0, 0.0});
    return methods;
}

void BenchmarkConfig::validate() const {
    if (n_grid.empty()) {
        throw ConfigError("benchmark n grid must be non-empty");
    }
    for (std::size_t n : n_grid) {
        if (n == 0) {
            throw ConfigError("benchmark n grid entries must be positive");
        }
    }
    if (methods.empty()) {
        throw ConfigError("benchmark requires at least one method");
    }
    if (replicates == 0) {
        throw ConfigError("benchmark requires at least one replicate");
    }
    if (n_permutations == 0) {
        throw ConfigError("benchmark requires a positive permutation count");
    }
    if (mask.m == 0) {
        throw ConfigError("benchmark requires m >= 1 masked units");
    }
    for (double level : coverage_levels) {
        if (!(level > 0.0 && level < 1.0)) {
            throw ConfigError("coverage levels must lie in (0, 1)");
        }
    }
}

Aggregate aggregate(const std::vector<double>& values) {
    Aggregate agg;
    if (values.empty()) {
        return agg;
    }
    KahanAccumulator mean_acc;
    for (double v : values) {
        mean_acc.add(v);
    }
    agg.mean = mean_acc.value() / static_cast<double>(values.size());
    if (values.size() > 1) {
        KahanAccumulator var_acc;
        for (double v : values) {
            const double d = v - agg.mean;
            var_acc.add(d * d);
        }
        agg.stddev = std::sqrt(var_acc.value() / static_cast<double>(values.size() - 1));
    }
    return agg;
}

BenchmarkReport run_benchmark(const BenchmarkConfig& config, int threads) {
    config.validate();

    const std::size_t n_cells = config.n_grid.size();
    const std::size_t jobs = n_cells * config.replicates;
    std::vector<std::vector<MethodOutcome>> results(jobs);

    parallel_for(0, jobs, threads, [&](std::size_t job) {
        const std::size_t ni = job / config.replicates;
        const std::size_t rep = job % config.replicates;
        const std::size_t n = config.n_grid[ni];
        const std::uint64_t setup_seed =
            mix64(config.master_seed, static_cast<std::uint64_t>(config.setup));
        const std::uint64_t cell_seed = mix64(setup_seed, ni * 1'000'003ULL + rep + 1);

        std::vector<MethodOutcome>& out = results[job];
        out.resize(config.methods.size());

        Dataset dataset;
        try {
            RngStream gen(cell_seed, 0);
            const std::vector<XyPair> pairs = generate(config.setup, n + config.mask.m, gen);
            RngStream mask_rng(cell_seed, 1);
            dataset = apply_mask(pairs, config.mask, mask_rng);
        } catch (const Error& e) {
            for (auto& outcome : out) {
                outcome.error = e.what();
            }
            return;
        }

        for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
            MethodOutcome& outcome = out[mi];
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const RngStream loocv_base(cell_seed, 2);
                const MethodConfig resolved =
                    resolve_method_k(dataset, config.methods[mi], loocv_base, 1);
                outcome.resolved_k = resolved.k.value_or(0);

                const ImputationRun run = impute_all(dataset, resolved, cell_seed, 1, 1);

                const std::vector<std::vector<double>> xs = [&] {
                    std::vector<std::vector<double>> v;
                    v.reserve(dataset.m());
                    for (const auto& unit : dataset.missing) {
                        v.push_back(unit.x);
                    }
                    return v;
                }();
                const std::vector<double> truths = dataset.missing_truths();
                const JointSample truth_joint = JointSample::from_xy(xs, truths);
                const JointSample imputed_joint = JointSample::from_xy(xs, run.per_unit);

                RngStream perm_rng(cell_seed, 8 + mi);
                const EvalReport eval =
                    evaluate_joint_samples(truth_joint, imputed_joint, config.n_permutations, perm_rng);
                outcome.energy = eval.energy;
                outcome.p_value = eval.p_value;
                outcome.rmse_value = eval.rmse;

                if (resolved.method == Method::knn_sampler && !config.coverage_levels.empty()) {
                    const NeighborIndex index(dataset.observed_covariates(),
                                              dataset.n() >= 64 ? Acceleration::spatial_tree
                                                                : Acceleration::brute_force);
                    const std::vector<double> responses = dataset.observed_responses();
                    std::vector<std::vector<PredictionInterval>> intervals(
                        config.coverage_levels.size());
                    for (std::size_t j = 0; j < dataset.m(); ++j) {
                        RngStream unit_rng(cell_seed, unit_stream_id(2, j));
                        const EmpiricalConditional conditional = knn_conditional(
                            index, responses, dataset.missing[j].x, *resolved.k, unit_rng);
                        for (std::size_t li = 0; li < config.coverage_levels.size(); ++li) {
                            intervals[li].push_back(
                                prediction_interval(conditional, 1.0 - config.coverage_levels[li]));
                        }
                    }
                    outcome.coverage.resize(config.coverage_levels.size());
                    for (std::size_t li = 0; li < config.coverage_levels.size(); ++li) {
                        outcome.coverage[li] = coverage_probability(intervals[li], truths);
                    }
                }
                outcome.ok = true;
            } catch (const Error& e) {
                outcome.error = e.what();
            }
            outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    });

    BenchmarkReport report;
    report.config = config;
    for (std::size_t ni = 0; ni < n_cells; ++ni) {
        for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
            BenchmarkCell cell;
            cell.setup = setup_name(config.setup);
            cell.n = config.n_grid[ni];
            cell.method = method_name(config.methods[mi].method);
            cell.k_policy = config.methods[mi].k
                                ? "fixed:" + std::to_string(*config.methods[mi].k)
                                : "auto";
            for (std::size_t rep = 0; rep < config.replicates; ++rep) {
                const MethodOutcome& outcome = results[ni * config.replicates + rep][mi];
                cell.wall_clock_seconds += outcome.seconds;
                if (!outcome.ok) {
                    if (!cell.error) {
                        cell.error = outcome.error;
                    }
                    continue;
                }
                ++cell.replicates_done;
                cell.energy.push_back(outcome.energy);
                cell.p_value.push_back(outcome.p_value);
                cell.rmse.push_back(outcome.rmse_value);
                cell.resolved_k.push_back(outcome.resolved_k);
                for (std::size_t li = 0; li < outcome.coverage.size(); ++li) {
                    cell.coverage[level_label(config.coverage_levels[li])].push_back(
                        outcome.coverage[li]);
                }
            }
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

namespace {

nlohmann::json method_to_json(const MethodConfig& method) {
    nlohmann::json j;
    j["method"] = method_name(method.method);
    if (method.k) {
        j["k"] = *method.k;
    } else {
        j["k"] = nullptr;
    }
    j["tau"] = method.tau;
    j["bandwidth_h"] = method.bandwidth_h;
    return j;
}

MethodConfig method_from_json(const nlohmann::json& j) {
    MethodConfig method;
    const auto parsed = method_from_name(j.at("method").get<std::string>());
    if (!parsed) {
        throw ConfigError("unknown method in report: " + j.at("method").get<std::string>());
    }
    method.method = *parsed;
    if (!j.at("k").is_null()) {
        method.k = j.at("k").get<std::size_t>();
    }
    method.tau = j.at("tau").get<double>();
    method.bandwidth_h = j.at("bandwidth_h").get<double>();
    return method;
}

nlohmann::json aggregate_to_json(const Aggregate& agg) {
    nlohmann::json j;
    j["mean"] = agg.mean;
    if (agg.stddev) {
        j["std"] = *agg.stddev;
    } else {
        j["std"] = nullptr;
    }
    return j;
}

nlohmann::json report_to_json(const BenchmarkReport& report, bool include_timings) {
    nlohmann::json j;
    j["schema_version"] = report.schema_version;

    nlohmann::json cfg;
    cfg["setup"] = setup_name(report.config.setup);
    cfg["n_grid"] = report.config.n_grid;
    cfg["mask"] = {{"mechanism", mechanism_name(report.config.mask.mechanism)},
                   {"m", report.config.mask.m},
                   {"window_lo", report.config.mask.window_lo},
                   {"window_hi", report.config.mask.window_hi}};
    cfg["methods"] = nlohmann::json::array();
    for (const auto& method : report.config.methods) {
        cfg["methods"].push_back(method_to_json(method));
    }
    cfg["replicates"] = report.config.replicates;
    cfg["n_permutations"] = report.config.n_permutations;
    cfg["coverage_levels"] = report.config.coverage_levels;
    cfg["master_seed"] = report.config.master_seed;
    j["config"] = cfg;

    j["cells"] = nlohmann::json::array();
    for (const auto& cell : report.cells) {
        nlohmann::json c;
        c["setup"] = cell.setup;
        c["n"] = cell.n;
        c["method"] = cell.method;
        c["k_policy"] = cell.k_policy;
        c["replicates_done"] = cell.replicates_done;
        c["energy"] = cell.energy;
        c["p_value"] = cell.p_value;
        c["rmse"] = cell.rmse;
        c["resolved_k"] = cell.resolved_k;
        c["coverage"] = nlohmann::json::object();
        for (const auto& [label, values] : cell.coverage) {
            c["coverage"][label] = values;
        }
        c["aggregates"] = {{"energy", aggregate_to_json(aggregate(cell.energy))},
                           {"p_value", aggregate_to_json(aggregate(cell.p_value))},
                           {"rmse", aggregate_to_json(aggregate(cell.rmse))}};
        for (const auto& [label, values] : cell.coverage) {
            c["aggregates"]["coverage_" + label] = aggregate_to_json(aggregate(values));
        }
        if (cell.error) {
            c["error"] = *cell.error;
        } else {
            c["error"] = nullptr;
        }
        if (include_timings) {
            c["wall_clock_seconds"] = cell.wall_clock_seconds;
        }
        j["cells"].push_back(c);
    }
    j["absent_by_design"] = report.absent_by_design;
    return j;
}

} // namespace

std::string report_to_json_string(const BenchmarkReport& report, bool include_timings) {
    return report_to_json(report, include_timings).dump(2) + "\n";
}

void export_report(const BenchmarkReport& report, const std::string& path, ReportFormat format,
                   bool include_timings) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write report: " + path);
    }
    if (format == ReportFormat::json) {
        out << report_to_json_string(report, include_timings);
        return;
    }
    // CSV long format: one row per (setup, n, method, metric).
    out << "setup,n,method,metric,mean,std\n";
    auto emit = [&](const BenchmarkCell& cell, const std::string& metric,
                    const std::vector<double>& values) {
        const Aggregate agg = aggregate(values);
        out << cell.setup << ',' << cell.n << ',' << cell.method << ',' << metric << ','
            << (values.empty() ? "" : format_double(agg.mean)) << ','
            << (agg.stddev ? format_double(*agg.stddev) : "") << '\n';
    };
    for (const auto& cell : report.cells) {
        emit(cell, "energy", cell.energy);
        emit(cell, "p_value", cell.p_value);
        emit(cell, "rmse", cell.rmse);
        for (const auto& [label, values] : cell.coverage) {
            emit(cell, "coverage_" + label, values);
        }
    }
}

BenchmarkReport report_from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read report: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid report JSON: ") + e.what());
    }

    BenchmarkReport report;
    report.schema_version = j.at("schema_version").get<int>();
    const auto& cfg = j.at("config");
    report.config.setup = setup_from_name(cfg.at("setup").get<std::string>());
    report.config.n_grid = cfg.at("n_grid").get<std::vector<std::size_t>>();
    report.config.mask.mechanism = mechanism_from_name(cfg.at("mask").at("mechanism").get<std::string>());
    report.config.mask.m = cfg.at("mask").at("m").get<std::size_t>();
    report.config.mask.window_lo = cfg.at("mask").at("window_lo").get<double>();
    report.config.mask.window_hi = cfg.at("mask").at("window_hi").get<double>();
    report.config.methods.clear();
    for (const auto& mj : cfg.at("methods")) {
        report.config.methods.push_back(method_from_json(mj));
    }
    report.config.replicates = cfg.at("replicates").get<std::size_t>();
    report.config.n_permutations = cfg.at("n_permutations").get<std::size_t>();
    report.config.coverage_levels = cfg.at("coverage_levels").get<std::vector<double>>();
    report.config.master_seed = cfg.at("master_seed").get<std::uint64_t>();

    report.cells.clear();
    for (const auto& cj : j.at("cells")) {
        BenchmarkCell cell;
        cell.setup = cj.at("setup").get<std::string>();
        cell.n = cj.at("n").get<std::size_t>();
        cell.method = cj.at("method").get<std::string>();
        cell.k_policy = cj.at("k_policy").get<std::string>();
        cell.replicates_done = cj.at("replicates_done").get<std::size_t>();
        cell.energy = cj.at("energy").get<std::vector<double>>();
        cell.p_value = cj.at("p_value").get<std::vector<double>>();
        cell.rmse = cj.at("rmse").get<std::vector<double>>();
        cell.resolved_k = cj.at("resolved_k").get<std::vector<std::size_t>>();
        for (const auto& [label, values] : cj.at("coverage").items()) {
            cell.coverage[label] = values.get<std::vector<double>>();
        }
        if (!cj.at("error").is_null()) {
            cell.error = cj.at("error").get<std::string>();
        }
        if (cj.contains("wall_clock_seconds")) {
            cell.wall_clock_seconds = cj.at("wall_clock_seconds").get<double>();
        }
        report.cells.push_back(std::move(cell));
    }
    report.absent_by_design = j.at("absent_by_design").get<std::vector<std::string>>();
    return report;
}

} // namespace knnsampler
