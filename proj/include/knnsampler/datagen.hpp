#pragma once

#include <string>
#include <vector>

#include "knnsampler/dataset.hpp"
#include "knnsampler/rng.hpp"

namespace knnsampler {

struct XyPair {
    double x = 0.0;
    double y = 0.0;
};

enum class SetupKind { linear_chisq, noisy_ring };

std::string setup_name(SetupKind setup);

// y = x + eps with x ~ uniform(-2, 2) and eps ~ chi-square(2); the noise is
// strictly positive, so y - x > 0 for every pair.
std::vector<XyPair> gen_linear_chisq(std::size_t N, RngStream& rng);

// Noisy unit ring: theta ~ uniform[0, 2pi), eps ~ Normal(0, sigma^2) with
// sigma^2 = 0.1 (variance convention; set noise_is_sd to read 0.1 as the
// standard deviation instead); x = (1+eps) cos theta, y = (1+eps) sin theta.
std::vector<XyPair> gen_noisy_ring(std::size_t N, RngStream& rng, bool noise_is_sd = false);

std::vector<XyPair> generate(SetupKind setup, std::size_t N, RngStream& rng,
                             bool ring_noise_is_sd = false);

enum class Mechanism { mcar, mar_window };

// Which units lose their response: m uniformly at random among all units
// (MCAR) or among units whose covariate lies in [window_lo, window_hi]
// (MAR window).
struct MaskSpec {
    Mechanism mechanism = Mechanism::mar_window;
    std::size_t m = 200;
    double window_lo = 0.5;
    double window_hi = 1.5;
};

// Masks exactly spec.m units, storing each masked response as the unit's
// truth.  Rows keep their generation order.  Throws InfeasibleMaskError when
// fewer than m units are eligible.
Dataset apply_mask(const std::vector<XyPair>& pairs, const MaskSpec& spec, RngStream& rng);

// Complete dataset (no missing units) from generated pairs.
Dataset dataset_from_pairs(const std::vector<XyPair>& pairs);

} // namespace knnsampler
