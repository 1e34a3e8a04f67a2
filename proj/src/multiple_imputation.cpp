#include "knnsampler/multiple_imputation.hpp"

#include <iostream>

#include "knnsampler/errors.hpp"
#include "knnsampler/parallel.hpp"

namespace knnsampler {

std::vector<ImputationRun> impute_multiple(const Dataset& dataset, const MethodConfig& config,
                                           std::size_t B, std::uint64_t master_seed, int threads) {
    if (B == 0) {
        throw ConfigError("B must be at least 1");
    }
    const bool stochastic =
        config.method == Method::knn_sampler || config.method == Method::knn_kde;
    if (!stochastic && B > 1) {
        std::cerr << "warning: method " << method_name(config.method)
                  << " is deterministic; all " << B << " replicates will be identical\n";
    }
    std::vector<ImputationRun> runs;
    runs.reserve(B);
    for (std::size_t b = 1; b <= B; ++b) {
        runs.push_back(impute_all(dataset, config, master_seed, b, threads));
    }
    return runs;
}

PooledEstimate rubin_pool(std::span<const double> estimates, std::span<const double> within_vars) {
    if (estimates.size() != within_vars.size()) {
        throw ConsistencyError("estimates and within variances must have equal length");
    }
    const std::size_t B = estimates.size();
    if (B < 2) {
        throw InsufficientReplicatesError("Rubin pooling requires B >= 2 replicates");
    }
    for (double w : within_vars) {
        if (w < 0.0) {
            throw ConsistencyError("within-replicate variance must be non-negative");
        }
    }

    KahanAccumulator point_acc;
    for (double e : estimates) {
        point_acc.add(e);
    }
    const double point = point_acc.value() / static_cast<double>(B);

    KahanAccumulator between_acc;
    for (double e : estimates) {
        const double d = e - point;
        between_acc.add(d * d);
    }
    const double between = between_acc.value() / static_cast<double>(B - 1);

    KahanAccumulator within_acc;
    for (double w : within_vars) {
        within_acc.add(w);
    }
    const double within_mean = within_acc.value() / static_cast<double>(B);

    PooledEstimate pooled;
    pooled.point = point;
    pooled.between_var = between;
    pooled.within_var_mean = within_mean;
    pooled.total_var = within_mean + (1.0 + 1.0 / static_cast<double>(B)) * between;
    pooled.B = B;
    return pooled;
}

MeanEstimate completed_mean_estimate(const Dataset& dataset, const ImputationRun& run) {
    if (run.per_unit.size() != dataset.m()) {
        throw ConsistencyError("imputation run does not cover the missing units");
    }
    const std::size_t total = dataset.total();
    if (total == 0) {
        throw ConsistencyError("dataset has no units");
    }
    KahanAccumulator sum;
    for (const auto& pair : dataset.observed) {
        sum.add(pair.y);
    }
    for (double v : run.per_unit) {
        sum.add(v);
    }
    const double mean = sum.value() / static_cast<double>(total);

    KahanAccumulator ss;
    for (const auto& pair : dataset.observed) {
        const double d = pair.y - mean;
        ss.add(d * d);
    }
    for (double v : run.per_unit) {
        const double d = v - mean;
        ss.add(d * d);
    }
    MeanEstimate est;
    est.estimate = mean;
    est.within_var = total > 1
                         ? ss.value() / static_cast<double>(total - 1) / static_cast<double>(total)
                         : 0.0;
    return est;
}

} // namespace knnsampler
