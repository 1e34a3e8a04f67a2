#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "knnsampler/rng.hpp"

namespace knnsampler {

// Sample of joint covariate-response vectors z = (x ++ y), stored row-major.
struct JointSample {
    std::vector<double> flat;
    std::size_t count = 0;
    std::size_t dim = 0;

    static JointSample from_rows(const std::vector<std::vector<double>>& rows);
    // Builds z_i = (x_i ++ y_i); the response is the last coordinate.
    static JointSample from_xy(const std::vector<std::vector<double>>& xs,
                               std::span<const double> ys);

    std::span<const double> row(std::size_t i) const { return {flat.data() + i * dim, dim}; }
};

// Unbiased (U-statistic) estimate of the squared energy distance:
//   2/(ma*mb) sum ||a_i - b_j||  -  sum_{i!=j} ||a_i - a_j|| / (ma(ma-1))
//                                -  sum_{i!=j} ||b_i - b_j|| / (mb(mb-1)).
// May be negative.  Both samples need at least two points.
double energy_distance(const JointSample& a, const JointSample& b);

// Permutation two-sample test with the energy distance as statistic: pools
// the points, reshuffles group labels n_permutations times via seeded
// Fisher-Yates, and reports the add-one p-value
// (1 + #{permuted >= observed}) / (1 + n_permutations), always in (0, 1].
double permutation_pvalue(const JointSample& a, const JointSample& b,
                          std::size_t n_permutations, RngStream& rng);

// Root mean squared error between two aligned lists.
double rmse(std::span<const double> imputed, std::span<const double> truth);

// Permutation machinery with a precomputed pooled distance matrix; exposed
// so callers running many permutations (or verifying the statistic) can
// reuse it.
class EnergyPermutationTester {
public:
    EnergyPermutationTester(const JointSample& a, const JointSample& b);

    double observed_statistic() const;
    double pvalue(std::size_t n_permutations, RngStream& rng) const;

    // Statistic for an explicit pooled ordering (the first ma entries form
    // one group); the groups enter symmetrically.
    double statistic_for(std::span<const std::uint32_t> pooled_order) const;

private:
    std::size_t ma_ = 0;
    std::size_t mb_ = 0;
    std::vector<double> dmat_; // (ma+mb)^2 pooled pairwise distances
};

// Bundled metrics for one truth/imputation comparison.
struct EvalReport {
    double energy = 0.0;
    double p_value = 1.0;
    double rmse = 0.0;
    std::size_t n_permutations = 0;
    std::uint64_t seed = 0;
};

// Energy + permutation p-value on the joint vectors and RMSE on the response
// (last) coordinate.
EvalReport evaluate_joint_samples(const JointSample& truth, const JointSample& imputed,
                                  std::size_t n_permutations, RngStream& rng);

} // namespace knnsampler
