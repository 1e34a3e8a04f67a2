#pragma once

#include <optional>
#include <string>
#include <vector>

#include "knnsampler/datagen.hpp"
#include "knnsampler/embedding.hpp"

namespace knnsampler {

// How the neighbour count scales with n: k = max(1, round(c * n^(2/(2+d))))
// unless fixed_k pins it to a constant (the no-convergence control).
struct KRule {
    double c = 1.0;
    double intrinsic_dim_d = 1.0;
    std::optional<std::size_t> fixed_k;

    std::size_t k_for(std::size_t n) const;
    std::string describe() const;
};

struct ConvergenceReport {
    SetupKind setup = SetupKind::linear_chisq;
    double query_x = 0.0;
    std::vector<std::size_t> n_grid;
    std::vector<std::size_t> k_values;
    KRule k_rule;
    std::size_t replicates = 0;
    std::size_t reference_size = 0;
    double kernel_alpha = 0.0;
    std::uint64_t master_seed = 0;
    std::vector<double> mmd2_mean;
    std::vector<double> mmd2_std;
    double fitted_slope = 0.0;
};

// Draws `size` points from the true conditional distribution of y given
// x = query_x: analytically for the linear chi-square model, and for the
// ring by keeping generated pairs with |x - query_x| <= window_halfwidth
// (ReferenceInfeasibleError once the generation budget is exhausted).
std::vector<double> reference_conditional_sample(SetupKind setup, double query_x, std::size_t size,
                                                 RngStream& rng, double window_halfwidth = 0.01);

// For each n in the grid and each replicate: generate n observed pairs, form
// the kNN conditional at query_x with k from the rule, and measure its
// squared MMD against a fixed reference sample of the true conditional.  The
// reference self-term is computed once and shared across cells.  With no
// kernel given, the Gaussian scale comes from the median heuristic on the
// reference.  Reports per-n means/stds and the least-squares slope of
// log mean MMD^2 against log n.
ConvergenceReport run_convergence_experiment(SetupKind setup, double query_x,
                                             const std::vector<std::size_t>& n_grid,
                                             std::size_t replicates, const KRule& rule,
                                             std::size_t reference_size,
                                             std::optional<Kernel> kernel,
                                             std::uint64_t master_seed, int threads = 0);

// Ordinary least-squares slope of log(values) against log(ns).
double fit_loglog_slope(const std::vector<std::size_t>& ns, const std::vector<double>& values);

// Histogram-shape test: two substantial local maxima (each at least a
// quarter of the tallest bin) whose connecting valley is at most half of
// either peak.  Among qualifying pairs the one with the tallest smaller peak
// is reported.
struct BimodalityCheck {
    std::vector<std::size_t> counts;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t peak_left_bin = 0;
    std::size_t peak_right_bin = 0;
    std::size_t valley_bin = 0;
    double peak_left = 0.0;
    double peak_right = 0.0;
    double valley = 0.0;
    bool bimodal = false;
};

BimodalityCheck check_bimodality(std::span<const double> values, std::size_t n_bins);

// JSON report emitted by the theory-check command.
void save_convergence_report(const ConvergenceReport& report, const std::string& path);

} // namespace knnsampler
