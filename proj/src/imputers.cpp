#include "knnsampler/imputers.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "knnsampler/errors.hpp"
#include "knnsampler/parallel.hpp"

namespace knnsampler {

EmpiricalConditional knn_conditional(const NeighborIndex& index, std::span<const double> responses,
                                     std::span<const double> query, std::size_t k, RngStream& rng) {
    if (responses.size() != index.size()) {
        throw ConsistencyError("responses length does not match index size");
    }
    const NeighborList neighbors = index.query(query, k, rng);
    EmpiricalConditional conditional;
    conditional.support.reserve(k);
    for (std::size_t idx : neighbors.indices) {
        conditional.support.push_back(responses[idx]);
    }
    return conditional;
}

double impute_sampler(const EmpiricalConditional& conditional, RngStream& rng) {
    if (conditional.support.empty()) {
        throw ConsistencyError("empty conditional");
    }
    return conditional.support[rng.below(conditional.support.size())];
}

double impute_knn_mean(const EmpiricalConditional& conditional) {
    if (conditional.support.empty()) {
        throw ConsistencyError("empty conditional");
    }
    double sum = 0.0;
    for (double y : conditional.support) {
        sum += y;
    }
    return sum / static_cast<double>(conditional.support.size());
}

double LinearModel::predict(std::span<const double> x) const {
    if (x.size() != coefficients.size()) {
        throw ConsistencyError("prediction covariate dimension mismatch");
    }
    double value = intercept;
    for (std::size_t j = 0; j < x.size(); ++j) {
        value += coefficients[j] * x[j];
    }
    return value;
}

LinearModel fit_linear(const std::vector<ObservedPair>& observed) {
    if (observed.empty()) {
        throw EmptyObservedError("linear fit requires observed pairs");
    }
    const std::size_t n = observed.size();
    const std::size_t p = observed[0].x.size();
    const std::size_t cols = p + 1;
    if (n < cols) {
        throw SingularFitError("linear fit requires at least p+1 observations");
    }

    // Householder QR on the design matrix [1 | x], column-major.
    std::vector<double> a(n * cols);
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (observed[i].x.size() != p) {
            throw ConsistencyError("covariate dimension mismatch in linear fit");
        }
        a[i] = 1.0;
        for (std::size_t j = 0; j < p; ++j) {
            a[(j + 1) * n + i] = observed[i].x[j];
        }
        b[i] = observed[i].y;
    }

    std::vector<double> col_norms(cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += a[j * n + i] * a[j * n + i];
        }
        col_norms[j] = std::sqrt(s);
    }

    std::vector<double> rdiag(cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j) {
        double norm = 0.0;
        for (std::size_t i = j; i < n; ++i) {
            norm = std::hypot(norm, a[j * n + i]);
        }
        if (norm == 0.0 || norm <= 1e-12 * col_norms[j]) {
            throw SingularFitError("design matrix is rank deficient at column " + std::to_string(j));
        }
        if (a[j * n + j] < 0.0) {
            norm = -norm;
        }
        for (std::size_t i = j; i < n; ++i) {
            a[j * n + i] /= norm;
        }
        a[j * n + j] += 1.0;

        for (std::size_t kcol = j + 1; kcol < cols; ++kcol) {
            double s = 0.0;
            for (std::size_t i = j; i < n; ++i) {
                s += a[j * n + i] * a[kcol * n + i];
            }
            s = -s / a[j * n + j];
            for (std::size_t i = j; i < n; ++i) {
                a[kcol * n + i] += s * a[j * n + i];
            }
        }
        double s = 0.0;
        for (std::size_t i = j; i < n; ++i) {
            s += a[j * n + i] * b[i];
        }
        s = -s / a[j * n + j];
        for (std::size_t i = j; i < n; ++i) {
            b[i] += s * a[j * n + i];
        }
        rdiag[j] = -norm;
    }

    // Back substitution on R beta = Q^T b.
    std::vector<double> beta(cols, 0.0);
    for (std::size_t jj = cols; jj-- > 0;) {
        double s = b[jj];
        for (std::size_t kcol = jj + 1; kcol < cols; ++kcol) {
            s -= a[kcol * n + jj] * beta[kcol];
        }
        if (rdiag[jj] == 0.0) {
            throw SingularFitError("zero pivot in linear solve");
        }
        beta[jj] = s / rdiag[jj];
    }

    LinearModel model;
    model.intercept = beta[0];
    model.coefficients.assign(beta.begin() + 1, beta.end());
    return model;
}

double impute_knn_kde(const NeighborIndex& index, std::span<const double> responses,
                      std::span<const double> query, std::size_t k, double tau, double bandwidth_h,
                      RngStream& rng) {
    if (responses.size() != index.size()) {
        throw ConsistencyError("responses length does not match index size");
    }
    if (tau < 0.0 || bandwidth_h < 0.0) {
        throw ConfigError("tau and bandwidth must be non-negative");
    }
    const NeighborList neighbors = index.query(query, k, rng);

    // Softmax over squared distances, shifted by the minimum for stability.
    double min_sq = neighbors.distances[0] * neighbors.distances[0];
    for (double d : neighbors.distances) {
        min_sq = std::min(min_sq, d * d);
    }
    std::vector<double> cumulative(neighbors.indices.size());
    double total = 0.0;
    for (std::size_t j = 0; j < neighbors.indices.size(); ++j) {
        const double d2 = neighbors.distances[j] * neighbors.distances[j];
        total += std::exp(-tau * (d2 - min_sq));
        cumulative[j] = total;
    }
    const double u = rng.uniform01() * total;
    const std::size_t pick = static_cast<std::size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    const std::size_t j = std::min(pick, neighbors.indices.size() - 1);

    double value = responses[neighbors.indices[j]];
    if (bandwidth_h > 0.0) {
        value += bandwidth_h * rng.normal();
    }
    return value;
}

ImputationRun impute_all(const Dataset& dataset, const MethodConfig& config,
                         std::uint64_t master_seed, std::uint64_t replicate_id, int threads) {
    dataset.validate();

    ImputationRun run;
    run.method_config = config;
    run.replicate_id = replicate_id;
    run.master_seed = master_seed;
    if (dataset.m() == 0) {
        return run;
    }
    if (dataset.observed.empty()) {
        throw EmptyObservedError("imputation requires at least one observed pair");
    }

    const bool needs_k = config.method != Method::linear;
    if (needs_k && !config.k_resolved()) {
        throw ConfigError("method requires a resolved k (run selection for \"auto\")");
    }
    const std::size_t k = needs_k ? *config.k : 0;
    if (needs_k && (k == 0 || k > dataset.n())) {
        throw BoundsError("k must satisfy 1 <= k <= n");
    }

    std::unique_ptr<NeighborIndex> index;
    LinearModel model;
    std::vector<double> responses;
    if (config.method == Method::linear) {
        model = fit_linear(dataset.observed);
    } else {
        const Acceleration accel =
            dataset.n() >= 64 ? Acceleration::spatial_tree : Acceleration::brute_force;
        index = std::make_unique<NeighborIndex>(dataset.observed_covariates(), accel);
        responses = dataset.observed_responses();
    }

    run.per_unit.assign(dataset.m(), 0.0);
    parallel_for(0, dataset.m(), threads, [&](std::size_t i) {
        RngStream rng(master_seed, unit_stream_id(replicate_id, i));
        const std::span<const double> x{dataset.missing[i].x};
        switch (config.method) {
            case Method::knn_sampler: {
                const auto conditional = knn_conditional(*index, responses, x, k, rng);
                run.per_unit[i] = impute_sampler(conditional, rng);
                break;
            }
            case Method::knn_imputer: {
                const auto conditional = knn_conditional(*index, responses, x, k, rng);
                run.per_unit[i] = impute_knn_mean(conditional);
                break;
            }
            case Method::linear:
                run.per_unit[i] = model.predict(x);
                break;
            case Method::knn_kde:
                run.per_unit[i] =
                    impute_knn_kde(*index, responses, x, k, config.tau, config.bandwidth_h, rng);
                break;
        }
    });
    return run;
}

} // namespace knnsampler
