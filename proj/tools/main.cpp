// Command-line front end: generate / impute / evaluate / benchmark /
// theory-check.  Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "knnsampler/benchmark.hpp"
#include "knnsampler/dataset.hpp"
#include "knnsampler/datagen.hpp"
#include "knnsampler/errors.hpp"
#include "knnsampler/evaluation.hpp"
#include "knnsampler/imputers.hpp"
#include "knnsampler/multiple_imputation.hpp"
#include "knnsampler/selection.hpp"
#include "knnsampler/theory.hpp"

namespace {

using namespace knnsampler;

SetupKind parse_setup(const std::string& name) {
    if (name == "linear" || name == "linear_chisq" || name == "linear-chisq") {
        return SetupKind::linear_chisq;
    }
    if (name == "ring" || name == "noisy_ring" || name == "noisy-ring") {
        return SetupKind::noisy_ring;
    }
    throw ConfigError("unknown setup: " + name);
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> items;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            items.push_back(item);
        }
    }
    return items;
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
    std::vector<std::size_t> values;
    for (const auto& item : split_list(csv)) {
        values.push_back(std::stoull(item));
    }
    return values;
}

std::string replicate_path(const std::string& path, std::size_t b) {
    const std::size_t dot = path.find_last_of('.');
    const std::size_t slash = path.find_last_of("/\\");
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
        return path + "_" + std::to_string(b);
    }
    return path.substr(0, dot) + "_" + std::to_string(b) + path.substr(dot);
}

struct CommonFlags {
    std::uint64_t seed = 0;
    int threads = 0;
};

int cmd_generate(const std::string& setup_name, std::size_t n, std::size_t m,
                 const std::string& mechanism, double window_lo, double window_hi,
                 bool ring_noise_sd, const std::string& out_path, const CommonFlags& common) {
    const SetupKind setup = parse_setup(setup_name);
    RngStream gen(common.seed, 0);
    const std::vector<XyPair> pairs = generate(setup, n, gen, ring_noise_sd);
    if (m == 0) {
        save_dataset(dataset_from_pairs(pairs), out_path);
        std::cout << "wrote " << n << " complete rows to " << out_path << "\n";
        return 0;
    }
    MaskSpec spec;
    spec.mechanism = mechanism == "mcar" ? Mechanism::mcar : Mechanism::mar_window;
    spec.m = m;
    spec.window_lo = window_lo;
    spec.window_hi = window_hi;
    RngStream mask_rng(common.seed, 1);
    const Dataset ds = apply_mask(pairs, spec, mask_rng);
    save_dataset(ds, out_path);
    std::cout << "wrote " << n << " rows (" << m << " masked) to " << out_path << "\n";
    return 0;
}

int cmd_impute(const std::string& input, const std::string& output, const std::string& method_str,
               const std::string& k_str, std::size_t replicates, double tau, double bandwidth,
               const std::string& covariates, const std::string& response,
               const std::string& truth_column, const CommonFlags& common) {
    const auto method = method_from_name(method_str);
    if (!method) {
        throw ConfigError("unknown method: " + method_str);
    }
    std::optional<std::string> truth =
        truth_column.empty() ? std::nullopt : std::optional<std::string>(truth_column);
    const Dataset ds = load_dataset(input, split_list(covariates), response, truth);

    MethodConfig config;
    config.method = *method;
    config.tau = tau;
    config.bandwidth_h = bandwidth;
    if (k_str != "auto") {
        config.k = std::stoull(k_str);
    }

    LoocvReport loocv;
    const RngStream loocv_base(common.seed, 2);
    const MethodConfig resolved = resolve_method_k(ds, config, loocv_base, common.threads, &loocv);
    if (!config.k && resolved.k) {
        std::cout << "resolved k = " << *resolved.k;
        if (config.method == Method::knn_sampler) {
            std::cout << " (loocv over " << loocv.k_grid.size() << " candidates";
            const auto it = std::find(loocv.k_grid.begin(), loocv.k_grid.end(), loocv.k_star);
            if (it != loocv.k_grid.end()) {
                std::cout << ", min mse = "
                          << loocv.loo_mse[static_cast<std::size_t>(it - loocv.k_grid.begin())];
            }
            std::cout << ")";
        }
        std::cout << "\n";
    }

    if (replicates <= 1) {
        const ImputationRun run = impute_all(ds, resolved, common.seed, 1, common.threads);
        save_imputed(ds, run, output);
        std::cout << "imputed " << ds.m() << " units -> " << output << "\n";
        return 0;
    }
    const std::vector<ImputationRun> runs =
        impute_multiple(ds, resolved, replicates, common.seed, common.threads);
    for (std::size_t b = 0; b < runs.size(); ++b) {
        const std::string path = replicate_path(output, b + 1);
        save_imputed(ds, runs[b], path);
        std::cout << "imputed " << ds.m() << " units -> " << path << "\n";
    }
    return 0;
}

int cmd_evaluate(const std::string& truth_path, const std::string& imputed_path,
                 const std::string& covariates, const std::string& response,
                 std::size_t permutations, const std::string& out_path,
                 const CommonFlags& common) {
    const std::vector<std::string> cov_names = split_list(covariates);
    const Dataset truth_ds = load_dataset(truth_path, cov_names, response);
    const Dataset imputed_ds = load_dataset(imputed_path, cov_names, response);
    if (truth_ds.total() != imputed_ds.total()) {
        throw ConsistencyError("truth and imputed files must have the same number of rows");
    }
    if (truth_ds.m() != 0 || imputed_ds.m() != 0) {
        throw ConsistencyError("evaluation inputs must have a response in every row");
    }

    // Restrict to rows flagged by save_imputed when the flag column exists;
    // otherwise compare all rows.
    std::vector<bool> selected(truth_ds.total(), true);
    if (const auto flags = load_imputed_flags(imputed_path)) {
        if (flags->size() != truth_ds.total()) {
            throw ConsistencyError("flag column length does not match row count");
        }
        selected = *flags;
    }

    std::vector<std::vector<double>> xs;
    std::vector<double> truth_y;
    std::vector<double> imputed_y;
    for (std::size_t r = 0; r < truth_ds.total(); ++r) {
        if (!selected[r]) {
            continue;
        }
        const auto& t = truth_ds.observed[truth_ds.row_pos[r]];
        const auto& i = imputed_ds.observed[imputed_ds.row_pos[r]];
        xs.push_back(t.x);
        truth_y.push_back(t.y);
        imputed_y.push_back(i.y);
    }
    if (xs.size() < 2) {
        throw InsufficientSampleError("evaluation needs at least two selected rows");
    }

    const JointSample truth_joint = JointSample::from_xy(xs, truth_y);
    const JointSample imputed_joint = JointSample::from_xy(xs, imputed_y);
    RngStream rng(common.seed, 3);
    const EvalReport report = evaluate_joint_samples(truth_joint, imputed_joint, permutations, rng);

    std::cout << "rows=" << xs.size() << "\n";
    std::cout << "energy=" << format_double(report.energy) << "\n";
    std::cout << "p_value=" << format_double(report.p_value) << "\n";
    std::cout << "rmse=" << format_double(report.rmse) << "\n";
    if (!out_path.empty()) {
        nlohmann::json j;
        j["rows"] = xs.size();
        j["energy"] = report.energy;
        j["p_value"] = report.p_value;
        j["rmse"] = report.rmse;
        j["n_permutations"] = report.n_permutations;
        j["seed"] = common.seed;
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            throw IoError("cannot write report: " + out_path);
        }
        out << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_benchmark(const std::string& setup_name, const std::string& n_list, std::size_t m,
                  const std::string& mechanism, double window_lo, double window_hi,
                  const std::string& methods_list, std::size_t replicates, std::size_t permutations,
                  const std::string& out_path, const std::string& format, bool timings,
                  const CommonFlags& common) {
    BenchmarkConfig config;
    config.setup = parse_setup(setup_name);
    config.n_grid = parse_size_list(n_list);
    config.mask.mechanism = mechanism == "mcar" ? Mechanism::mcar : Mechanism::mar_window;
    config.mask.m = m;
    config.mask.window_lo = window_lo;
    config.mask.window_hi = window_hi;
    config.replicates = replicates;
    config.n_permutations = permutations;
    config.master_seed = common.seed;
    if (!methods_list.empty()) {
        config.methods.clear();
        for (const auto& name : split_list(methods_list)) {
            const auto method = method_from_name(name);
            if (!method) {
                throw ConfigError("unknown method: " + name);
            }
            for (const auto& preset : BenchmarkConfig::default_methods()) {
                if (preset.method == *method) {
                    config.methods.push_back(preset);
                }
            }
        }
    }

    const BenchmarkReport report = run_benchmark(config, common.threads);
    export_report(report, out_path,
                  format == "csv" ? ReportFormat::csv : ReportFormat::json, timings);

    for (const auto& cell : report.cells) {
        std::cout << cell.setup << " n=" << cell.n << " " << cell.method;
        if (cell.error) {
            std::cout << " error: " << *cell.error << "\n";
            continue;
        }
        const Aggregate energy = aggregate(cell.energy);
        const Aggregate pv = aggregate(cell.p_value);
        const Aggregate rm = aggregate(cell.rmse);
        std::cout << " energy=" << format_double(energy.mean) << " p=" << format_double(pv.mean)
                  << " rmse=" << format_double(rm.mean) << "\n";
    }
    std::cout << "report -> " << out_path << "\n";
    return 0;
}

int cmd_theory_check(const std::string& setup_str, double query_x, bool query_x_set,
                     const std::string& n_list, std::size_t replicates, double c, double d,
                     std::size_t fixed_k, std::size_t reference_size, double kernel_alpha,
                     const std::string& out_path, const CommonFlags& common) {
    const SetupKind setup = parse_setup(setup_str);
    const double qx = query_x_set ? query_x : (setup == SetupKind::linear_chisq ? 0.0 : 0.5);

    KRule rule;
    rule.c = c;
    rule.intrinsic_dim_d = d;
    if (fixed_k > 0) {
        rule.fixed_k = fixed_k;
    }
    std::optional<Kernel> kernel;
    if (kernel_alpha > 0.0) {
        kernel = Kernel{KernelFamily::gaussian, kernel_alpha};
    }
    const ConvergenceReport report =
        run_convergence_experiment(setup, qx, parse_size_list(n_list), replicates, rule,
                                   reference_size, kernel, common.seed, common.threads);
    if (!out_path.empty()) {
        save_convergence_report(report, out_path);
    }

    std::cout << "setup=" << setup_name(report.setup) << " query_x=" << format_double(report.query_x)
              << " kernel_alpha=" << format_double(report.kernel_alpha) << "\n";
    for (std::size_t i = 0; i < report.n_grid.size(); ++i) {
        std::cout << "n=" << report.n_grid[i] << " k=" << report.k_values[i]
                  << " mmd2_mean=" << format_double(report.mmd2_mean[i])
                  << " mmd2_std=" << format_double(report.mmd2_std[i]) << "\n";
    }
    std::cout << "fitted_slope=" << format_double(report.fitted_slope) << "\n";
    if (!out_path.empty()) {
        std::cout << "report -> " << out_path << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"kNN-based missing-value imputation toolkit"};
    app.require_subcommand(1);

    CommonFlags common;
    app.add_option("--threads", common.threads,
                   "worker threads (0 = KNNSAMPLER_THREADS env or hardware)");

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
    std::string gen_setup = "linear";
    std::size_t gen_n = 10000;
    std::size_t gen_m = 0;
    std::string gen_mechanism = "mar";
    double gen_window_lo = 0.5, gen_window_hi = 1.5;
    bool gen_ring_sd = false;
    std::string gen_out;
    gen->add_option("--setup", gen_setup, "linear | ring")
        ->check(CLI::IsMember({"linear", "ring"}));
    gen->add_option("--n", gen_n, "total number of rows");
    gen->add_option("--m", gen_m, "rows to mask (0 = complete data)");
    gen->add_option("--mechanism", gen_mechanism, "mar | mcar")
        ->check(CLI::IsMember({"mar", "mcar"}));
    gen->add_option("--window-lo", gen_window_lo, "MAR window lower edge");
    gen->add_option("--window-hi", gen_window_hi, "MAR window upper edge");
    gen->add_flag("--ring-noise-sd", gen_ring_sd, "read the ring noise 0.1 as a std dev");
    gen->add_option("--out", gen_out, "output file")->required();
    gen->add_option("--seed", common.seed, "master seed (default 0)");

    // impute
    auto* imp = app.add_subcommand("impute", "fill missing responses in a dataset file");
    std::string imp_input, imp_output, imp_method = "knn-sampler", imp_k = "auto";
    std::size_t imp_replicates = 1;
    double imp_tau = 50.0, imp_bandwidth = 0.03;
    std::string imp_cov = "x", imp_resp = "y", imp_truth;
    imp->add_option("--input", imp_input, "input dataset")->required();
    imp->add_option("--output", imp_output, "output dataset")->required();
    imp->add_option("--method", imp_method, "knn-sampler | knn-imputer | linear | knn-kde")
        ->check(CLI::IsMember({"knn-sampler", "knn-imputer", "linear", "knn-kde", "knn_sampler",
                               "knn_imputer", "knn_kde"}));
    imp->add_option("--k", imp_k, "neighbour count or 'auto'");
    imp->add_option("--replicates", imp_replicates, "B imputed datasets (suffixed files)");
    imp->add_option("--tau", imp_tau, "kNNxKDE inverse temperature");
    imp->add_option("--bandwidth", imp_bandwidth, "kNNxKDE bandwidth h");
    imp->add_option("--covariates", imp_cov, "comma-separated covariate columns");
    imp->add_option("--response", imp_resp, "response column");
    imp->add_option("--truth", imp_truth, "optional truth column to carry through");
    imp->add_option("--seed", common.seed, "master seed (default 0)");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "score an imputed file against the truth");
    std::string eval_truth, eval_imputed, eval_cov = "x", eval_resp = "y", eval_out;
    std::size_t eval_perms = 199;
    eval->add_option("--truth", eval_truth, "complete dataset with true responses")->required();
    eval->add_option("--imputed", eval_imputed, "imputed dataset (flag column selects rows)")
        ->required();
    eval->add_option("--covariates", eval_cov, "comma-separated covariate columns");
    eval->add_option("--response", eval_resp, "response column");
    eval->add_option("--permutations", eval_perms, "permutation count");
    eval->add_option("--out", eval_out, "optional JSON report path");
    eval->add_option("--seed", common.seed, "master seed (default 0)");

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "run the full method comparison");
    std::string bench_setup = "linear";
    std::string bench_n = "2800,4800,6800,8800,10800";
    std::size_t bench_m = 200;
    std::string bench_mechanism = "mar";
    double bench_window_lo = 0.5, bench_window_hi = 1.5;
    std::string bench_methods;
    std::size_t bench_replicates = 10, bench_perms = 199;
    std::string bench_out = "benchmark_report.json", bench_format = "json";
    bool bench_timings = false;
    bench->add_option("--setup", bench_setup, "linear | ring")
        ->check(CLI::IsMember({"linear", "ring"}));
    bench->add_option("--n", bench_n, "comma-separated observed sizes");
    bench->add_option("--m", bench_m, "masked units per cell");
    bench->add_option("--mechanism", bench_mechanism, "mar | mcar")
        ->check(CLI::IsMember({"mar", "mcar"}));
    bench->add_option("--window-lo", bench_window_lo, "MAR window lower edge");
    bench->add_option("--window-hi", bench_window_hi, "MAR window upper edge");
    bench->add_option("--methods", bench_methods,
                      "comma-separated subset of linear,knn-imputer,knn-kde,knn-sampler");
    bench->add_option("--replicates", bench_replicates, "independent repetitions");
    bench->add_option("--permutations", bench_perms, "permutation count");
    bench->add_option("--out", bench_out, "report path");
    bench->add_option("--format", bench_format, "json | csv")
        ->check(CLI::IsMember({"json", "csv"}));
    bench->add_flag("--timings", bench_timings, "include wall-clock fields in the JSON report");
    bench->add_option("--seed", common.seed, "master seed (default 0)");

    // theory-check
    auto* theory = app.add_subcommand("theory-check", "measure the MMD convergence rate");
    std::string th_setup = "linear";
    double th_x = 0.0;
    std::string th_n = "1000,4000,16000,64000";
    std::size_t th_replicates = 10;
    double th_c = 1.0, th_d = 1.0;
    std::size_t th_fixed_k = 0;
    std::size_t th_ref = 100000;
    double th_alpha = 0.0;
    std::string th_out = "theory_report.json";
    theory->add_option("--setup", th_setup, "linear | ring")
        ->check(CLI::IsMember({"linear", "ring"}));
    auto* th_x_opt = theory->add_option("--x", th_x, "query covariate (default 0 linear, 0.5 ring)");
    theory->add_option("--n", th_n, "comma-separated sample sizes");
    theory->add_option("--replicates", th_replicates, "replicates per size (>= 3)");
    theory->add_option("--c", th_c, "k-rule constant");
    theory->add_option("--d", th_d, "intrinsic dimension in the k rule");
    theory->add_option("--fixed-k", th_fixed_k, "pin k to a constant (0 = use the rule)");
    theory->add_option("--reference-size", th_ref, "reference sample size");
    theory->add_option("--alpha", th_alpha, "Gaussian kernel scale (0 = median heuristic)");
    theory->add_option("--out", th_out, "report path");
    theory->add_option("--seed", common.seed, "master seed (default 0)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            return cmd_generate(gen_setup, gen_n, gen_m, gen_mechanism, gen_window_lo,
                                gen_window_hi, gen_ring_sd, gen_out, common);
        }
        if (imp->parsed()) {
            return cmd_impute(imp_input, imp_output, imp_method, imp_k, imp_replicates, imp_tau,
                              imp_bandwidth, imp_cov, imp_resp, imp_truth, common);
        }
        if (eval->parsed()) {
            return cmd_evaluate(eval_truth, eval_imputed, eval_cov, eval_resp, eval_perms, eval_out,
                                common);
        }
        if (bench->parsed()) {
            return cmd_benchmark(bench_setup, bench_n, bench_m, bench_mechanism, bench_window_lo,
                                 bench_window_hi, bench_methods, bench_replicates, bench_perms,
                                 bench_out, bench_format, bench_timings, common);
        }
        if (theory->parsed()) {
            return cmd_theory_check(th_setup, th_x, th_x_opt->count() > 0, th_n, th_replicates,
                                    th_c, th_d, th_fixed_k, th_ref, th_alpha, th_out, common);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
