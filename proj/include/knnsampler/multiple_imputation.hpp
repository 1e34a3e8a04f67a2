#pragma once

#include <span>
#include <vector>

#include "knnsampler/imputers.hpp"

namespace knnsampler {

// B mutually independent imputation runs; replicate b uses replicate_id = b
// (1-based), so impute_multiple(..., 1, seed) equals impute_all at
// replicate_id 1.  A deterministic method with B > 1 emits a warning on
// stderr since all replicates will coincide.
std::vector<ImputationRun> impute_multiple(const Dataset& dataset, const MethodConfig& config,
                                           std::size_t B, std::uint64_t master_seed,
                                           int threads = 0);

// Rubin's rule pooling of B per-replicate estimates.
struct PooledEstimate {
    double point = 0.0;
    double between_var = 0.0;     // sample variance (denominator B-1)
    double within_var_mean = 0.0; // mean of supplied within-replicate variances
    double total_var = 0.0;       // within_var_mean + (1 + 1/B) * between_var
    std::size_t B = 0;
};

PooledEstimate rubin_pool(std::span<const double> estimates, std::span<const double> within_vars);

// Built-in example estimator: the completed-data sample mean with its
// standard within-replicate variance, sample variance / (n + m).
struct MeanEstimate {
    double estimate = 0.0;
    double within_var = 0.0;
};

MeanEstimate completed_mean_estimate(const Dataset& dataset, const ImputationRun& run);

} // namespace knnsampler
