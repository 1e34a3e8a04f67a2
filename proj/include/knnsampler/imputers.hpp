#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "knnsampler/dataset.hpp"
#include "knnsampler/neighbors.hpp"
#include "knnsampler/rng.hpp"

namespace knnsampler {

// The kNN conditional distribution at a query point: the k neighbour
// responses in neighbour order, each carrying probability mass 1/k.
struct EmpiricalConditional {
    std::vector<double> support;

    std::size_t k() const { return support.size(); }
};

// Empirical conditional of the responses at the query's k nearest
// neighbours.  rng resolves boundary ties only.
EmpiricalConditional knn_conditional(const NeighborIndex& index, std::span<const double> responses,
                                     std::span<const double> query, std::size_t k, RngStream& rng);

// One draw from the conditional: support[j] with j uniform on {0..k-1}.
double impute_sampler(const EmpiricalConditional& conditional, RngStream& rng);

// Arithmetic mean of the support (the kNN regression estimate).
double impute_knn_mean(const EmpiricalConditional& conditional);

// Ordinary least squares fit with intercept.
struct LinearModel {
    std::vector<double> coefficients;
    double intercept = 0.0;

    double predict(std::span<const double> x) const;
};

LinearModel fit_linear(const std::vector<ObservedPair>& observed);

// Soft-kNN draw: neighbour j is selected with probability proportional to
// exp(-tau * d_j^2) over the k nearest, then bandwidth_h * standard normal
// noise is added to its response (skipped when bandwidth_h == 0).
double impute_knn_kde(const NeighborIndex& index, std::span<const double> responses,
                      std::span<const double> query, std::size_t k, double tau, double bandwidth_h,
                      RngStream& rng);

// One full imputation pass over every missing unit.
struct ImputationRun {
    MethodConfig method_config;
    std::vector<double> per_unit;
    std::uint64_t replicate_id = 1;
    std::uint64_t master_seed = 0;
};

// Applies the configured method independently to each missing unit.  Unit i
// draws from RngStream(master_seed, replicate_id * 2^32 + i), so the result
// is a pure function of (dataset, config, master_seed, replicate_id) and
// does not depend on the worker count.
ImputationRun impute_all(const Dataset& dataset, const MethodConfig& config,
                         std::uint64_t master_seed, std::uint64_t replicate_id, int threads = 0);

} // namespace knnsampler
