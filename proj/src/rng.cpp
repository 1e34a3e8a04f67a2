#include "knnsampler/rng.hpp"

#include <cmath>

#include "knnsampler/errors.hpp"

namespace knnsampler {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a;
    std::uint64_t h = splitmix64(s);
    s = h ^ b;
    h = splitmix64(s);
    return splitmix64(s) ^ h;
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed), stream_id_(stream_id), engine_(mix64(master_seed, stream_id)) {}

std::uint64_t RngStream::next_u64() {
    return engine_();
}

double RngStream::uniform01() {
    // 53 random bits centred on half-steps: values in (0, 1) exactly.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
}

std::uint64_t RngStream::below(std::uint64_t n) {
    if (n == 0) {
        throw BoundsError("RngStream::below requires n > 0");
    }
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t u = next_u64();
    while (u >= limit) {
        u = next_u64();
    }
    return u % n;
}

double RngStream::normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

double RngStream::chisq2() {
    return -2.0 * std::log(uniform01());
}

RngStream RngStream::derive(std::uint64_t child_id) const {
    return RngStream(mix64(master_seed_, stream_id_), child_id);
}

} // namespace knnsampler
