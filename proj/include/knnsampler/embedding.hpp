#pragma once

#include <span>
#include <vector>

#include "knnsampler/dataset.hpp"
#include "knnsampler/rng.hpp"

namespace knnsampler {

enum class KernelFamily { gaussian };

// Reproducing kernel on the response line.  The Gaussian family
// l(y, y') = exp(-alpha (y - y')^2) satisfies 0 < l <= 1 with l(y, y) = 1.
struct Kernel {
    KernelFamily family = KernelFamily::gaussian;
    double scale_alpha = 1.0;

    double operator()(double y, double yp) const;
    void validate() const;
};

// Discrete distribution on the response line: values with non-negative
// weights summing to one (within 1e-12).
struct WeightedSample {
    std::vector<double> values;
    std::vector<double> weights;

    static WeightedSample uniform(std::vector<double> values);
    void validate() const;
};

// Squared MMD between two discrete distributions (V-statistic):
//   sum w_i w_j l(a_i, a_j) - 2 sum w_i v_m l(a_i, b_m) + sum v_m v_n l(b_m, b_n).
// Mathematically non-negative; results inside the 1e-12 round-off floor
// (including tiny negatives) report as exactly zero.
double mmd_squared(const WeightedSample& a, const WeightedSample& b, const Kernel& kernel,
                   int threads = 0);

// The two building blocks of mmd_squared, exposed so a fixed sample's self
// term can be computed once and reused across many comparisons.
double mmd_self_term(const WeightedSample& sample, const Kernel& kernel, int threads = 0);
double mmd_cross_term(const WeightedSample& a, const WeightedSample& b, const Kernel& kernel,
                      int threads = 0);

// Unbiased (U-statistic) squared MMD for equal-weight samples; may be
// negative.  Diagnostic counterpart of the V-statistic default.
double mmd_squared_unbiased(std::span<const double> a, std::span<const double> b,
                            const Kernel& kernel);

// Gaussian scale from the median heuristic: alpha = 1 / (2 median^2) over
// pairwise absolute differences of the pooled values (an evenly strided
// subsample of at most 2048 values keeps this tractable).  Falls back to 1
// when the median distance is zero.
double median_heuristic_alpha(std::span<const double> pooled_values);

// Squared MMD between the uniform kNN conditional at `query` and a reference
// sample standing in for the true conditional distribution.
double knn_embedding_error(const std::vector<ObservedPair>& observed, std::span<const double> query,
                           std::size_t k, const WeightedSample& reference, const Kernel& kernel,
                           RngStream& rng, int threads = 0);

} // namespace knnsampler
