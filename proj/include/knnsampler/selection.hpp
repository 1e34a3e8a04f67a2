#pragma once

#include <cstddef>
#include <vector>

#include "knnsampler/dataset.hpp"
#include "knnsampler/rng.hpp"

namespace knnsampler {

// Leave-one-out cross-validation of kNN regression over a candidate grid.
struct LoocvReport {
    std::vector<std::size_t> k_grid;
    std::vector<double> loo_mse;
    std::size_t k_star = 0;
};

// Geometric grid {1, 2, 4, ...} up to n/2 plus ceil(n^(2/3)), restricted to
// [1, n-1], sorted and deduplicated.
std::vector<std::size_t> default_k_grid(std::size_t n);

// For each unit, predicts its response as the kNN mean over the other n-1
// units and scores the squared error; one neighbour retrieval of depth
// max(k_grid) serves every grid value.  Ties at a rank-k boundary are broken
// by tie_rng.derive(unit * |grid| + grid_index) through pick_uniform_subset,
// so any implementation that follows the same derivation reproduces the
// report exactly.  The minimising k is reported, ties resolved toward
// smaller k.
LoocvReport loocv_select_k(const std::vector<ObservedPair>& observed,
                           const std::vector<std::size_t>& k_grid, const RngStream& tie_rng,
                           int threads = 0);

// Fills in an unresolved k: LOOCV over the default grid for the sampler,
// the conventional 5 for the mean imputer, n for kNNxKDE.
MethodConfig resolve_method_k(const Dataset& dataset, const MethodConfig& config,
                              const RngStream& tie_rng, int threads = 0,
                              LoocvReport* report_out = nullptr);

} // namespace knnsampler
