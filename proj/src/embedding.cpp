#include "knnsampler/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "knnsampler/errors.hpp"
#include "knnsampler/imputers.hpp"
#include "knnsampler/neighbors.hpp"
#include "knnsampler/parallel.hpp"

namespace knnsampler {

namespace {

constexpr std::size_t kRowChunk = 128;

std::size_t chunk_count(std::size_t rows) {
    return (rows + kRowChunk - 1) / kRowChunk;
}

} // namespace

double Kernel::operator()(double y, double yp) const {
    const double d = y - yp;
    return std::exp(-scale_alpha * d * d);
}

void Kernel::validate() const {
    if (!(scale_alpha > 0.0)) {
        throw ConfigError("kernel scale alpha must be positive");
    }
}

WeightedSample WeightedSample::uniform(std::vector<double> values) {
    WeightedSample s;
    const double w = 1.0 / static_cast<double>(values.size());
    s.weights.assign(values.size(), w);
    s.values = std::move(values);
    return s;
}

void WeightedSample::validate() const {
    if (values.empty() || values.size() != weights.size()) {
        throw ConsistencyError("weighted sample needs matching non-empty values and weights");
    }
    KahanAccumulator acc;
    for (double w : weights) {
        if (w < 0.0) {
            throw ConsistencyError("weights must be non-negative");
        }
        acc.add(w);
    }
    if (std::abs(acc.value() - 1.0) > 1e-12) {
        throw ConsistencyError("weights must sum to one (within 1e-12)");
    }
}

double mmd_self_term(const WeightedSample& sample, const Kernel& kernel, int threads) {
    sample.validate();
    kernel.validate();
    const std::size_t n = sample.values.size();
    const double* v = sample.values.data();
    const double* w = sample.weights.data();

    return deterministic_chunk_sum(chunk_count(n), threads, [&](std::size_t c) {
        const std::size_t lo = c * kRowChunk;
        const std::size_t hi = std::min(lo + kRowChunk, n);
        KahanAccumulator acc;
        for (std::size_t i = lo; i < hi; ++i) {
            acc.add(w[i] * w[i] * kernel(v[i], v[i]));
            double row = 0.0;
            for (std::size_t j = i + 1; j < n; ++j) {
                row += w[j] * kernel(v[i], v[j]);
            }
            acc.add(2.0 * w[i] * row);
        }
        return acc.value();
    });
}

double mmd_cross_term(const WeightedSample& a, const WeightedSample& b, const Kernel& kernel,
                      int threads) {
    a.validate();
    b.validate();
    kernel.validate();
    const std::size_t na = a.values.size();
    const std::size_t nb = b.values.size();
    const double* av = a.values.data();
    const double* aw = a.weights.data();
    const double* bv = b.values.data();
    const double* bw = b.weights.data();

    return deterministic_chunk_sum(chunk_count(na), threads, [&](std::size_t c) {
        const std::size_t lo = c * kRowChunk;
        const std::size_t hi = std::min(lo + kRowChunk, na);
        KahanAccumulator acc;
        for (std::size_t i = lo; i < hi; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < nb; ++j) {
                row += bw[j] * kernel(av[i], bv[j]);
            }
            acc.add(aw[i] * row);
        }
        return acc.value();
    });
}

double mmd_squared(const WeightedSample& a, const WeightedSample& b, const Kernel& kernel,
                   int threads) {
    const double value = mmd_self_term(a, kernel, threads) -
                         2.0 * mmd_cross_term(a, b, kernel, threads) +
                         mmd_self_term(b, kernel, threads);
    // The V-statistic is non-negative; anything inside the round-off floor
    // (identical samples land at +-1e-16) reports as exactly zero.
    return value <= 1e-12 ? 0.0 : value;
}

double mmd_squared_unbiased(std::span<const double> a, std::span<const double> b,
                            const Kernel& kernel) {
    kernel.validate();
    if (a.size() < 2 || b.size() < 2) {
        throw InsufficientSampleError("unbiased MMD needs at least two points per sample");
    }
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    KahanAccumulator aa;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            aa.add(kernel(a[i], a[j]));
        }
    }
    KahanAccumulator bb;
    for (std::size_t i = 0; i < b.size(); ++i) {
        for (std::size_t j = i + 1; j < b.size(); ++j) {
            bb.add(kernel(b[i], b[j]));
        }
    }
    KahanAccumulator ab;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            ab.add(kernel(a[i], b[j]));
        }
    }
    return 2.0 * aa.value() / (na * (na - 1.0)) + 2.0 * bb.value() / (nb * (nb - 1.0)) -
           2.0 * ab.value() / (na * nb);
}

double median_heuristic_alpha(std::span<const double> pooled_values) {
    if (pooled_values.size() < 2) {
        return 1.0;
    }
    constexpr std::size_t kMaxPoints = 2048;
    std::vector<double> points;
    if (pooled_values.size() <= kMaxPoints) {
        points.assign(pooled_values.begin(), pooled_values.end());
    } else {
        points.reserve(kMaxPoints);
        for (std::size_t i = 0; i < kMaxPoints; ++i) {
            points.push_back(pooled_values[i * pooled_values.size() / kMaxPoints]);
        }
    }
    std::vector<double> diffs;
    diffs.reserve(points.size() * (points.size() - 1) / 2);
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            diffs.push_back(std::abs(points[i] - points[j]));
        }
    }
    auto mid = diffs.begin() + diffs.size() / 2;
    std::nth_element(diffs.begin(), mid, diffs.end());
    const double median = *mid;
    if (median <= 0.0) {
        return 1.0;
    }
    return 1.0 / (2.0 * median * median);
}

double knn_embedding_error(const std::vector<ObservedPair>& observed, std::span<const double> query,
                           std::size_t k, const WeightedSample& reference, const Kernel& kernel,
                           RngStream& rng, int threads) {
    if (observed.empty()) {
        throw EmptyObservedError("embedding error requires observed pairs");
    }
    std::vector<std::vector<double>> xs;
    xs.reserve(observed.size());
    std::vector<double> ys;
    ys.reserve(observed.size());
    for (const auto& pair : observed) {
        xs.push_back(pair.x);
        ys.push_back(pair.y);
    }
    const NeighborIndex index(xs, observed.size() >= 64 ? Acceleration::spatial_tree
                                                        : Acceleration::brute_force);
    const EmpiricalConditional conditional = knn_conditional(index, ys, query, k, rng);
    return mmd_squared(WeightedSample::uniform(conditional.support), reference, kernel, threads);
}

} // namespace knnsampler
