#include "knnsampler/selection.hpp"

#include <algorithm>
#include <cmath>

#include "knnsampler/errors.hpp"
#include "knnsampler/neighbors.hpp"
#include "knnsampler/parallel.hpp"

namespace knnsampler {

std::vector<std::size_t> default_k_grid(std::size_t n) {
    std::vector<std::size_t> grid;
    for (std::size_t k = 1; k <= n / 2; k *= 2) {
        grid.push_back(k);
    }
    const auto k_rate = static_cast<std::size_t>(
        std::ceil(std::pow(static_cast<double>(n), 2.0 / 3.0) - 1e-9));
    if (k_rate >= 1) {
        grid.push_back(k_rate);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    while (!grid.empty() && grid.back() > n - 1) {
        grid.pop_back();
    }
    if (grid.empty()) {
        grid.push_back(1);
    }
    return grid;
}

LoocvReport loocv_select_k(const std::vector<ObservedPair>& observed,
                           const std::vector<std::size_t>& k_grid, const RngStream& tie_rng,
                           int threads) {
    const std::size_t n = observed.size();
    if (n < 2) {
        throw BoundsError("loocv requires at least two observed pairs");
    }
    if (k_grid.empty()) {
        throw ConfigError("loocv requires a non-empty k grid");
    }
    for (std::size_t k : k_grid) {
        if (k == 0 || k > n - 1) {
            throw BoundsError("loocv grid entry must satisfy 1 <= k <= n-1 (k=" +
                              std::to_string(k) + ", n=" + std::to_string(n) + ")");
        }
    }
    const std::size_t dim = observed[0].x.size();
    for (const auto& pair : observed) {
        if (pair.x.size() != dim) {
            throw ConsistencyError("covariate dimension mismatch in loocv");
        }
    }

    const std::size_t grid_size = k_grid.size();
    const std::size_t kmax = *std::max_element(k_grid.begin(), k_grid.end());
    std::vector<double> sq_errors(n * grid_size, 0.0);

    parallel_for(0, n, threads, [&](std::size_t i) {
        const std::size_t rest = n - 1;
        std::vector<std::pair<double, std::size_t>> cand;
        cand.reserve(rest);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            double s = 0.0;
            for (std::size_t a = 0; a < dim; ++a) {
                const double t = observed[i].x[a] - observed[j].x[a];
                s += t * t;
            }
            cand.emplace_back(std::sqrt(s), j);
        }

        // Sorted prefix of depth kmax under the canonical (distance, index)
        // order; ties of the prefix-boundary value may continue in the tail.
        if (kmax < rest) {
            std::nth_element(cand.begin(), cand.begin() + (kmax - 1), cand.end());
        }
        std::sort(cand.begin(), cand.begin() + kmax);
        const double boundary_d = cand[kmax - 1].first;
        std::vector<std::size_t> tail_ties;
        for (std::size_t t = kmax; t < rest; ++t) {
            if (cand[t].first == boundary_d) {
                tail_ties.push_back(cand[t].second);
            }
        }
        std::sort(tail_ties.begin(), tail_ties.end());

        std::vector<double> prefix_sum(kmax + 1, 0.0);
        for (std::size_t r = 0; r < kmax; ++r) {
            prefix_sum[r + 1] = prefix_sum[r] + observed[cand[r].second].y;
        }

        for (std::size_t g = 0; g < grid_size; ++g) {
            const std::size_t k = k_grid[g];
            const double dstar = cand[k - 1].first;
            const auto block_begin = std::lower_bound(
                cand.begin(), cand.begin() + kmax, dstar,
                [](const std::pair<double, std::size_t>& lhs, double v) { return lhs.first < v; });
            const auto block_end = std::upper_bound(
                cand.begin(), cand.begin() + kmax, dstar,
                [](double v, const std::pair<double, std::size_t>& rhs) { return v < rhs.first; });
            const std::size_t lo = static_cast<std::size_t>(block_begin - cand.begin());
            std::size_t hi = static_cast<std::size_t>(block_end - cand.begin());
            const bool extends = hi == kmax && dstar == boundary_d;
            const std::size_t hi_total = hi + (extends ? tail_ties.size() : 0);

            double prediction;
            if (hi_total <= k) {
                prediction = prefix_sum[k] / static_cast<double>(k);
            } else {
                std::vector<std::size_t> ties;
                ties.reserve(hi_total - lo);
                for (std::size_t r = lo; r < hi; ++r) {
                    ties.push_back(cand[r].second);
                }
                if (extends) {
                    ties.insert(ties.end(), tail_ties.begin(), tail_ties.end());
                }
                RngStream rng = tie_rng.derive(i * grid_size + g);
                const auto chosen = pick_uniform_subset(std::move(ties), k - lo, rng);
                double sum = prefix_sum[lo];
                for (std::size_t j : chosen) {
                    sum += observed[j].y;
                }
                prediction = sum / static_cast<double>(k);
            }
            const double err = prediction - observed[i].y;
            sq_errors[i * grid_size + g] = err * err;
        }
    });

    LoocvReport report;
    report.k_grid = k_grid;
    report.loo_mse.resize(grid_size);
    for (std::size_t g = 0; g < grid_size; ++g) {
        KahanAccumulator acc;
        for (std::size_t i = 0; i < n; ++i) {
            acc.add(sq_errors[i * grid_size + g]);
        }
        report.loo_mse[g] = acc.value() / static_cast<double>(n);
    }

    std::size_t best = 0;
    for (std::size_t g = 1; g < grid_size; ++g) {
        const bool better = report.loo_mse[g] < report.loo_mse[best] ||
                            (report.loo_mse[g] == report.loo_mse[best] && k_grid[g] < k_grid[best]);
        if (better) {
            best = g;
        }
    }
    report.k_star = k_grid[best];
    return report;
}

MethodConfig resolve_method_k(const Dataset& dataset, const MethodConfig& config,
                              const RngStream& tie_rng, int threads, LoocvReport* report_out) {
    MethodConfig resolved = config;
    if (config.method == Method::linear || config.k_resolved()) {
        return resolved;
    }
    switch (config.method) {
        case Method::knn_sampler: {
            const LoocvReport report =
                loocv_select_k(dataset.observed, default_k_grid(dataset.n()), tie_rng, threads);
            resolved.k = report.k_star;
            if (report_out) {
                *report_out = report;
            }
            break;
        }
        case Method::knn_imputer:
            resolved.k = std::min<std::size_t>(5, dataset.n());
            break;
        case Method::knn_kde:
            resolved.k = dataset.n();
            break;
        case Method::linear:
            break;
    }
    return resolved;
}

} // namespace knnsampler
