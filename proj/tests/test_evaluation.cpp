#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "knnsampler/errors.hpp"
#include "knnsampler/evaluation.hpp"
#include "knnsampler/rng.hpp"

using namespace knnsampler;

namespace {

double norm_diff(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double t = a[j] - b[j];
        s += t * t;
    }
    return std::sqrt(s);
}

// Direct triple-loop transcription of the unbiased statistic, accumulated in
// extended precision so the oracle's own round-off stays negligible.
double energy_oracle(const JointSample& a, const JointSample& b) {
    const long double ma = static_cast<long double>(a.count);
    const long double mb = static_cast<long double>(b.count);
    long double cross = 0.0L;
    for (std::size_t i = 0; i < a.count; ++i) {
        for (std::size_t j = 0; j < b.count; ++j) {
            cross += norm_diff(a.row(i), b.row(j));
        }
    }
    long double within_a = 0.0L;
    for (std::size_t i = 0; i < a.count; ++i) {
        for (std::size_t j = 0; j < a.count; ++j) {
            if (i != j) {
                within_a += norm_diff(a.row(i), a.row(j));
            }
        }
    }
    long double within_b = 0.0L;
    for (std::size_t i = 0; i < b.count; ++i) {
        for (std::size_t j = 0; j < b.count; ++j) {
            if (i != j) {
                within_b += norm_diff(b.row(i), b.row(j));
            }
        }
    }
    return static_cast<double>(2.0L / (ma * mb) * cross - within_a / (ma * (ma - 1.0L)) -
                               within_b / (mb * (mb - 1.0L)));
}

JointSample gaussian_sample(std::size_t m, double mean, RngStream& rng) {
    std::vector<std::vector<double>> rows;
    rows.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        rows.push_back({mean + rng.normal()});
    }
    return JointSample::from_rows(rows);
}

} // namespace

TEST_CASE("hand-computed energy of two identical two-point clouds") {
    const JointSample a = JointSample::from_rows({{0.0, 0.0}, {1.0, 1.0}});
    const double expected = -std::sqrt(2.0); // sqrt2 - sqrt2 - sqrt2
    CHECK(energy_distance(a, a) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("all-zero samples give zero energy") {
    const JointSample a = JointSample::from_rows({{0.0}, {0.0}});
    CHECK(energy_distance(a, a) == 0.0);
}

TEST_CASE("energy matches the triple-loop oracle on 100 random instances") {
    RngStream rng(11, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t ma = 2 + static_cast<std::size_t>(rng.below(199));
        const std::size_t mb = 2 + static_cast<std::size_t>(rng.below(199));
        const std::size_t dim = 1 + static_cast<std::size_t>(rng.below(3));
        std::vector<std::vector<double>> ra(ma, std::vector<double>(dim));
        std::vector<std::vector<double>> rb(mb, std::vector<double>(dim));
        for (auto& row : ra) {
            for (auto& v : row) {
                v = rng.uniform(-5, 5);
            }
        }
        for (auto& row : rb) {
            for (auto& v : row) {
                v = rng.uniform(-3, 7);
            }
        }
        const JointSample a = JointSample::from_rows(ra);
        const JointSample b = JointSample::from_rows(rb);
        const double fast = energy_distance(a, b);
        const double oracle = energy_oracle(a, b);
        REQUIRE(std::abs(fast - oracle) <= 1e-12 * std::max(1.0, std::abs(oracle)));
    }
}

TEST_CASE("energy is symmetric and rigid-motion invariant") {
    RngStream rng(12, 0);
    std::vector<std::vector<double>> ra, rb;
    for (int i = 0; i < 40; ++i) {
        ra.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2)});
        rb.push_back({rng.uniform(-1, 3), rng.uniform(-1, 3)});
    }
    const JointSample a = JointSample::from_rows(ra);
    const JointSample b = JointSample::from_rows(rb);
    const double base = energy_distance(a, b);
    CHECK(energy_distance(b, a) == doctest::Approx(base).epsilon(1e-12));

    const double angle = 0.73;
    auto move = [&](std::vector<std::vector<double>> rows) {
        for (auto& row : rows) {
            const double x = row[0], y = row[1];
            row[0] = std::cos(angle) * x - std::sin(angle) * y + 10.0;
            row[1] = std::sin(angle) * x + std::cos(angle) * y - 4.0;
        }
        return rows;
    };
    const double moved =
        energy_distance(JointSample::from_rows(move(ra)), JointSample::from_rows(move(rb)));
    CHECK(moved == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("energy input validation") {
    const JointSample ok = JointSample::from_rows({{0.0}, {1.0}});
    const JointSample one = JointSample::from_rows({{0.0}});
    const JointSample wide = JointSample::from_rows({{0.0, 1.0}, {1.0, 2.0}});
    CHECK_THROWS_AS(energy_distance(ok, one), InsufficientSampleError);
    CHECK_THROWS_AS(energy_distance(ok, wide), ConsistencyError);
}

TEST_CASE("the tester's observed statistic equals energy_distance") {
    RngStream rng(13, 0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<double>> ra, rb;
        for (int i = 0; i < 25; ++i) {
            ra.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2)});
            rb.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2)});
        }
        const JointSample a = JointSample::from_rows(ra);
        const JointSample b = JointSample::from_rows(rb);
        const EnergyPermutationTester tester(a, b);
        CHECK(tester.observed_statistic() ==
              doctest::Approx(energy_distance(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("relabeling the groups leaves the statistic unchanged") {
    RngStream rng(19, 0);
    const JointSample a = gaussian_sample(20, 0.0, rng);
    const JointSample b = gaussian_sample(20, 1.0, rng);
    const EnergyPermutationTester tester(a, b);
    std::vector<std::uint32_t> order(40);
    for (std::uint32_t i = 0; i < 40; ++i) {
        order[i] = i;
    }
    for (int shuffle = 0; shuffle < 10; ++shuffle) {
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            std::swap(order[i], order[rng.below(i + 1)]);
        }
        std::vector<std::uint32_t> swapped(order.begin() + 20, order.end());
        swapped.insert(swapped.end(), order.begin(), order.begin() + 20);
        REQUIRE(tester.statistic_for(order) ==
                doctest::Approx(tester.statistic_for(swapped)).epsilon(1e-12));
    }
}

TEST_CASE("null calibration: same distribution gives central p-values") {
    RngStream rng(14, 0);
    double total_p = 0.0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        const JointSample a = gaussian_sample(30, 0.0, rng);
        const JointSample b = gaussian_sample(30, 0.0, rng);
        RngStream perm_rng = rng.derive(static_cast<std::uint64_t>(t));
        total_p += permutation_pvalue(a, b, 199, perm_rng);
    }
    const double mean_p = total_p / trials;
    CHECK(mean_p > 0.4);
    CHECK(mean_p < 0.6);
}

TEST_CASE("separated distributions hit the minimum attainable p") {
    RngStream rng(15, 0);
    const JointSample a = gaussian_sample(200, 0.0, rng);
    const JointSample b = gaussian_sample(200, 5.0, rng);
    RngStream perm_rng(15, 1);
    const double p = permutation_pvalue(a, b, 199, perm_rng);
    CHECK(p == 1.0 / 200.0);
}

TEST_CASE("p-values are never zero") {
    RngStream rng(16, 0);
    for (int t = 0; t < 50; ++t) {
        const JointSample a = gaussian_sample(5, 0.0, rng);
        const JointSample b = gaussian_sample(5, rng.uniform(0, 4), rng);
        RngStream perm_rng = rng.derive(static_cast<std::uint64_t>(t));
        const double p = permutation_pvalue(a, b, 19, perm_rng);
        REQUIRE(p > 0.0);
        REQUIRE(p <= 1.0);
        REQUIRE(p >= 1.0 / 20.0);
    }
}

TEST_CASE("rmse basics") {
    CHECK(rmse(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 2.0}) == 0.0);
    CHECK(rmse(std::vector<double>{0.0, 0.0}, std::vector<double>{3.0, 4.0}) ==
          doctest::Approx(3.5355339059327378).epsilon(1e-15));
    CHECK_THROWS_AS(rmse(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}),
                    ConsistencyError);
}

TEST_CASE("averaged unbiased estimates approach the population energy distance") {
    // Two fixed discrete distributions on the line; the population value is
    // an exact finite sum over the supports.
    const std::vector<double> va{0.0, 2.0, 5.0};
    const std::vector<double> pa{0.5, 0.3, 0.2};
    const std::vector<double> vb{1.0, 4.0};
    const std::vector<double> pb{0.6, 0.4};

    double e_cross = 0.0, e_aa = 0.0, e_bb = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) {
        for (std::size_t j = 0; j < vb.size(); ++j) {
            e_cross += pa[i] * pb[j] * std::abs(va[i] - vb[j]);
        }
    }
    for (std::size_t i = 0; i < va.size(); ++i) {
        for (std::size_t j = 0; j < va.size(); ++j) {
            e_aa += pa[i] * pa[j] * std::abs(va[i] - va[j]);
        }
    }
    for (std::size_t i = 0; i < vb.size(); ++i) {
        for (std::size_t j = 0; j < vb.size(); ++j) {
            e_bb += pb[i] * pb[j] * std::abs(vb[i] - vb[j]);
        }
    }
    const double population = 2.0 * e_cross - e_aa - e_bb;

    RngStream rng(17, 0);
    auto draw = [&](const std::vector<double>& values, const std::vector<double>& probs) {
        const double u = rng.uniform01();
        double cum = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            cum += probs[i];
            if (u <= cum) {
                return values[i];
            }
        }
        return values.back();
    };

    const int resamples = 1000;
    const std::size_t m = 20;
    double sum = 0.0, sumsq = 0.0;
    for (int r = 0; r < resamples; ++r) {
        std::vector<std::vector<double>> ra, rb;
        for (std::size_t i = 0; i < m; ++i) {
            ra.push_back({draw(va, pa)});
            rb.push_back({draw(vb, pb)});
        }
        const double est =
            energy_distance(JointSample::from_rows(ra), JointSample::from_rows(rb));
        sum += est;
        sumsq += est * est;
    }
    const double mean = sum / resamples;
    const double sd = std::sqrt(sumsq / resamples - mean * mean);
    CHECK(std::abs(mean - population) <= 3.0 * sd / std::sqrt(resamples));
}

TEST_CASE("evaluate_joint_samples bundles the three metrics") {
    RngStream rng(18, 0);
    std::vector<std::vector<double>> xs;
    std::vector<double> truth_y, imp_y;
    for (int i = 0; i < 40; ++i) {
        xs.push_back({rng.uniform(-1, 1)});
        truth_y.push_back(rng.normal());
        imp_y.push_back(rng.normal());
    }
    const JointSample truth = JointSample::from_xy(xs, truth_y);
    const JointSample imputed = JointSample::from_xy(xs, imp_y);
    RngStream eval_rng(18, 1);
    const EvalReport report = evaluate_joint_samples(truth, imputed, 99, eval_rng);
    CHECK(report.energy == doctest::Approx(energy_distance(truth, imputed)).epsilon(1e-12));
    CHECK(report.rmse == doctest::Approx(rmse(imp_y, truth_y)).epsilon(1e-12));
    CHECK(report.p_value > 0.0);
    CHECK(report.n_permutations == 99);
}
