#include "knnsampler/uncertainty.hpp"

#include <algorithm>
#include <cmath>

#include "knnsampler/errors.hpp"
#include "knnsampler/parallel.hpp"

namespace knnsampler {

double conditional_probability(const EmpiricalConditional& conditional, double set_lower,
                               double set_upper) {
    if (conditional.support.empty()) {
        throw ConsistencyError("empty conditional");
    }
    if (!(set_lower < set_upper)) {
        throw ConfigError("set_lower must be strictly below set_upper");
    }
    std::size_t inside = 0;
    for (double y : conditional.support) {
        if (set_lower < y && y < set_upper) {
            ++inside;
        }
    }
    return static_cast<double>(inside) / static_cast<double>(conditional.support.size());
}

PredictionInterval prediction_interval(const EmpiricalConditional& conditional, double alpha) {
    const std::size_t k = conditional.support.size();
    if (k == 0) {
        throw ConsistencyError("empty conditional");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("alpha must lie in (0, 1)");
    }
    // Snap the rank before ceiling so k * alpha / 2 landing a hair above an
    // integer (e.g. 200 * 0.05 / 2) still maps to that integer.
    const double raw = static_cast<double>(k) * alpha / 2.0;
    const std::size_t r = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    const std::size_t rank = std::max<std::size_t>(r, 1);
    if (2 * rank > k) {
        throw InfeasibleLevelError("k = " + std::to_string(k) + " is too small for alpha = " +
                                   std::to_string(alpha));
    }
    std::vector<double> sorted = conditional.support;
    std::sort(sorted.begin(), sorted.end());
    return PredictionInterval{sorted[rank - 1], sorted[k - rank], 1.0 - alpha};
}

double conditional_std(const EmpiricalConditional& conditional) {
    const std::size_t k = conditional.support.size();
    if (k == 0) {
        throw ConsistencyError("empty conditional");
    }
    KahanAccumulator mean_acc;
    for (double y : conditional.support) {
        mean_acc.add(y);
    }
    const double mean = mean_acc.value() / static_cast<double>(k);
    KahanAccumulator var_acc;
    for (double y : conditional.support) {
        const double d = y - mean;
        var_acc.add(d * d);
    }
    return std::sqrt(var_acc.value() / static_cast<double>(k));
}

double coverage_probability(std::span<const PredictionInterval> intervals,
                            std::span<const double> truths) {
    if (intervals.size() != truths.size() || intervals.empty()) {
        throw ConsistencyError("intervals and truths must have equal non-zero length");
    }
    std::size_t covered = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (intervals[i].lower < truths[i] && truths[i] < intervals[i].upper) {
            ++covered;
        }
    }
    return static_cast<double>(covered) / static_cast<double>(truths.size());
}

} // namespace knnsampler
