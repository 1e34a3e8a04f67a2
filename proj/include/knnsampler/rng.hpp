#pragma once

#include <cstdint>
#include <random>

namespace knnsampler {

// SplitMix64 finalizer; used to turn (seed, stream) pairs into engine seeds.
std::uint64_t splitmix64(std::uint64_t& state);

// Stateless combine of two 64-bit values into a well-mixed seed.
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

// Deterministic, stream-addressable randomness.
//
// Two streams constructed from the same (master_seed, stream_id) produce
// identical draws; distinct stream_ids give statistically independent
// sequences.  All real-valued draws are fixed transforms of the raw 64-bit
// engine output, so sequences reproduce bit-for-bit for a given pair and do
// not depend on platform library implementations of <random> distributions.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

    std::uint64_t next_u64();

    // Uniform strictly inside (0, 1); safe as a log / Box-Muller argument.
    double uniform01();

    double uniform(double lo, double hi);

    // Uniform on {0, ..., n-1}, unbiased via rejection.  n must be > 0.
    std::uint64_t below(std::uint64_t n);

    // Standard normal via the Box-Muller transform (two uniforms per draw).
    double normal();

    // Chi-square with 2 degrees of freedom: -2 ln U, strictly positive.
    double chisq2();

    // Independent child stream; the parent's draw position is not consumed.
    RngStream derive(std::uint64_t child_id) const;

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

private:
    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
};

// Stream-id layout shared across the toolkit: per-unit streams live at
// replicate_id * 2^32 + unit_index, so replicate and unit spaces never
// collide and results are independent of scheduling.
inline constexpr std::uint64_t kReplicateStride = std::uint64_t{1} << 32;

inline std::uint64_t unit_stream_id(std::uint64_t replicate_id, std::uint64_t unit_index) {
    return replicate_id * kReplicateStride + unit_index;
}

} // namespace knnsampler
