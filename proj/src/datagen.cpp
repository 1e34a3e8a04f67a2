#include "knnsampler/datagen.hpp"

#include <algorithm>
#include <cmath>

#include "knnsampler/errors.hpp"
#include "knnsampler/neighbors.hpp"

namespace knnsampler {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

} // namespace

std::string setup_name(SetupKind setup) {
    return setup == SetupKind::linear_chisq ? "linear_chisq" : "noisy_ring";
}

std::vector<XyPair> gen_linear_chisq(std::size_t N, RngStream& rng) {
    std::vector<XyPair> pairs(N);
    for (auto& p : pairs) {
        p.x = rng.uniform(-2.0, 2.0);
        p.y = p.x + rng.chisq2();
    }
    return pairs;
}

std::vector<XyPair> gen_noisy_ring(std::size_t N, RngStream& rng, bool noise_is_sd) {
    const double sd = noise_is_sd ? 0.1 : std::sqrt(0.1);
    std::vector<XyPair> pairs(N);
    for (auto& p : pairs) {
        const double theta = rng.uniform(0.0, kTwoPi);
        const double radius = 1.0 + sd * rng.normal();
        p.x = radius * std::cos(theta);
        p.y = radius * std::sin(theta);
    }
    return pairs;
}

std::vector<XyPair> generate(SetupKind setup, std::size_t N, RngStream& rng,
                             bool ring_noise_is_sd) {
    return setup == SetupKind::linear_chisq ? gen_linear_chisq(N, rng)
                                            : gen_noisy_ring(N, rng, ring_noise_is_sd);
}

namespace {

Dataset build_dataset(const std::vector<XyPair>& pairs, const std::vector<bool>& masked,
                      bool with_truth) {
    Dataset ds;
    ds.dim_p = 1;
    ds.covariate_names = {"x"};
    ds.response_name = "y";
    if (with_truth) {
        ds.truth_name = "y_true";
    }
    ds.row_is_missing.reserve(pairs.size());
    ds.row_pos.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (masked[i]) {
            ds.row_is_missing.push_back(1);
            ds.row_pos.push_back(ds.missing.size());
            ds.missing.push_back(MissingUnit{{pairs[i].x}, pairs[i].y});
        } else {
            ds.row_is_missing.push_back(0);
            ds.row_pos.push_back(ds.observed.size());
            ds.observed.push_back(ObservedPair{{pairs[i].x}, pairs[i].y});
        }
    }
    return ds;
}

} // namespace

Dataset apply_mask(const std::vector<XyPair>& pairs, const MaskSpec& spec, RngStream& rng) {
    if (pairs.empty()) {
        throw ConfigError("cannot mask an empty pair list");
    }
    if (spec.m == 0) {
        throw ConfigError("mask size m must be positive");
    }
    std::vector<std::size_t> eligible;
    if (spec.mechanism == Mechanism::mcar) {
        eligible.resize(pairs.size());
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            eligible[i] = i;
        }
    } else {
        if (!(spec.window_lo < spec.window_hi)) {
            throw ConfigError("mask window requires lo < hi");
        }
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            if (pairs[i].x >= spec.window_lo && pairs[i].x <= spec.window_hi) {
                eligible.push_back(i);
            }
        }
    }
    if (eligible.size() < spec.m) {
        throw InfeasibleMaskError("only " + std::to_string(eligible.size()) +
                                  " units are eligible for masking, need " + std::to_string(spec.m));
    }
    const std::vector<std::size_t> chosen = pick_uniform_subset(std::move(eligible), spec.m, rng);
    std::vector<bool> masked(pairs.size(), false);
    for (std::size_t idx : chosen) {
        masked[idx] = true;
    }
    return build_dataset(pairs, masked, true);
}

Dataset dataset_from_pairs(const std::vector<XyPair>& pairs) {
    return build_dataset(pairs, std::vector<bool>(pairs.size(), false), false);
}

} // namespace knnsampler
