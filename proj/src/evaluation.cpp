#include "knnsampler/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "knnsampler/errors.hpp"
#include "knnsampler/parallel.hpp"

namespace knnsampler {

namespace {

double row_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double t = a[j] - b[j];
        s += t * t;
    }
    return std::sqrt(s);
}

void check_pair(const JointSample& a, const JointSample& b) {
    if (a.dim != b.dim || a.dim == 0) {
        throw ConsistencyError("joint samples must share a positive dimension");
    }
    if (a.count < 2 || b.count < 2) {
        throw InsufficientSampleError("unbiased energy statistics need at least two points per sample");
    }
}

} // namespace

JointSample JointSample::from_rows(const std::vector<std::vector<double>>& rows) {
    JointSample s;
    if (rows.empty()) {
        return s;
    }
    s.count = rows.size();
    s.dim = rows[0].size();
    s.flat.reserve(s.count * s.dim);
    for (const auto& row : rows) {
        if (row.size() != s.dim) {
            throw ConsistencyError("joint sample rows must share one dimension");
        }
        s.flat.insert(s.flat.end(), row.begin(), row.end());
    }
    return s;
}

JointSample JointSample::from_xy(const std::vector<std::vector<double>>& xs,
                                 std::span<const double> ys) {
    if (xs.size() != ys.size()) {
        throw ConsistencyError("covariates and responses must align");
    }
    JointSample s;
    if (xs.empty()) {
        return s;
    }
    s.count = xs.size();
    s.dim = xs[0].size() + 1;
    s.flat.reserve(s.count * s.dim);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i].size() + 1 != s.dim) {
            throw ConsistencyError("covariate rows must share one dimension");
        }
        s.flat.insert(s.flat.end(), xs[i].begin(), xs[i].end());
        s.flat.push_back(ys[i]);
    }
    return s;
}

double energy_distance(const JointSample& a, const JointSample& b) {
    check_pair(a, b);
    const double ma = static_cast<double>(a.count);
    const double mb = static_cast<double>(b.count);

    KahanAccumulator cross;
    for (std::size_t i = 0; i < a.count; ++i) {
        const auto ra = a.row(i);
        for (std::size_t j = 0; j < b.count; ++j) {
            cross.add(row_distance(ra, b.row(j)));
        }
    }
    KahanAccumulator within_a;
    for (std::size_t i = 0; i < a.count; ++i) {
        const auto ra = a.row(i);
        for (std::size_t j = i + 1; j < a.count; ++j) {
            within_a.add(row_distance(ra, a.row(j)));
        }
    }
    KahanAccumulator within_b;
    for (std::size_t i = 0; i < b.count; ++i) {
        const auto rb = b.row(i);
        for (std::size_t j = i + 1; j < b.count; ++j) {
            within_b.add(row_distance(rb, b.row(j)));
        }
    }

    return 2.0 * cross.value() / (ma * mb) - 2.0 * within_a.value() / (ma * (ma - 1.0)) -
           2.0 * within_b.value() / (mb * (mb - 1.0));
}

EnergyPermutationTester::EnergyPermutationTester(const JointSample& a, const JointSample& b) {
    check_pair(a, b);
    ma_ = a.count;
    mb_ = b.count;
    const std::size_t total = ma_ + mb_;
    std::vector<std::span<const double>> rows;
    rows.reserve(total);
    for (std::size_t i = 0; i < ma_; ++i) {
        rows.push_back(a.row(i));
    }
    for (std::size_t i = 0; i < mb_; ++i) {
        rows.push_back(b.row(i));
    }
    dmat_.assign(total * total, 0.0);
    for (std::size_t i = 0; i < total; ++i) {
        for (std::size_t j = i + 1; j < total; ++j) {
            const double d = row_distance(rows[i], rows[j]);
            dmat_[i * total + j] = d;
            dmat_[j * total + i] = d;
        }
    }
}

double EnergyPermutationTester::statistic_for(std::span<const std::uint32_t> pooled_order) const {
    const std::size_t total = ma_ + mb_;
    std::vector<std::uint8_t> in_a(total, 0);
    for (std::size_t i = 0; i < ma_; ++i) {
        in_a[pooled_order[i]] = 1;
    }
    KahanAccumulator cross;
    KahanAccumulator within_a;
    KahanAccumulator within_b;
    for (std::size_t i = 0; i < total; ++i) {
        const double* row = dmat_.data() + i * total;
        for (std::size_t j = i + 1; j < total; ++j) {
            const double d = row[j];
            if (in_a[i] != in_a[j]) {
                cross.add(d);
            } else if (in_a[i]) {
                within_a.add(d);
            } else {
                within_b.add(d);
            }
        }
    }
    const double ma = static_cast<double>(ma_);
    const double mb = static_cast<double>(mb_);
    return 2.0 * cross.value() / (ma * mb) - 2.0 * within_a.value() / (ma * (ma - 1.0)) -
           2.0 * within_b.value() / (mb * (mb - 1.0));
}

double EnergyPermutationTester::observed_statistic() const {
    std::vector<std::uint32_t> identity(ma_ + mb_);
    std::iota(identity.begin(), identity.end(), 0u);
    return statistic_for(identity);
}

double EnergyPermutationTester::pvalue(std::size_t n_permutations, RngStream& rng) const {
    if (n_permutations == 0) {
        throw ConfigError("n_permutations must be positive");
    }
    const double observed = observed_statistic();
    const std::size_t total = ma_ + mb_;
    std::vector<std::uint32_t> order(total);
    std::iota(order.begin(), order.end(), 0u);

    std::size_t at_least = 0;
    for (std::size_t p = 0; p < n_permutations; ++p) {
        // Fisher-Yates reshuffle of the pooled indices.
        for (std::size_t i = total - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
            std::swap(order[i], order[j]);
        }
        if (statistic_for(order) >= observed) {
            ++at_least;
        }
    }
    return static_cast<double>(1 + at_least) / static_cast<double>(1 + n_permutations);
}

double permutation_pvalue(const JointSample& a, const JointSample& b,
                          std::size_t n_permutations, RngStream& rng) {
    return EnergyPermutationTester(a, b).pvalue(n_permutations, rng);
}

double rmse(std::span<const double> imputed, std::span<const double> truth) {
    if (imputed.size() != truth.size() || imputed.empty()) {
        throw ConsistencyError("imputed and truth lists must have equal non-zero length");
    }
    KahanAccumulator acc;
    for (std::size_t i = 0; i < imputed.size(); ++i) {
        const double d = imputed[i] - truth[i];
        acc.add(d * d);
    }
    return std::sqrt(acc.value() / static_cast<double>(imputed.size()));
}

EvalReport evaluate_joint_samples(const JointSample& truth, const JointSample& imputed,
                                  std::size_t n_permutations, RngStream& rng) {
    if (truth.count != imputed.count) {
        throw ConsistencyError("truth and imputed samples must have equal size");
    }
    EvalReport report;
    report.energy = energy_distance(truth, imputed);
    report.p_value = EnergyPermutationTester(truth, imputed).pvalue(n_permutations, rng);
    std::vector<double> truth_y(truth.count);
    std::vector<double> imp_y(imputed.count);
    for (std::size_t i = 0; i < truth.count; ++i) {
        truth_y[i] = truth.row(i)[truth.dim - 1];
        imp_y[i] = imputed.row(i)[imputed.dim - 1];
    }
    report.rmse = rmse(imp_y, truth_y);
    report.n_permutations = n_permutations;
    report.seed = rng.master_seed();
    return report;
}

} // namespace knnsampler
