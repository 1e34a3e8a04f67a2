#pragma once

#include <cstddef>
#include <functional>

namespace knnsampler {

// Default worker count: KNNSAMPLER_THREADS when set to a positive integer,
// otherwise the hardware concurrency (at least 1).
int default_threads();

// requested > 0 selects that many workers; requested <= 0 selects the default.
int effective_threads(int requested);

// Runs fn(i) for every i in [begin, end).  Work is handed out in fixed-size
// blocks through an atomic cursor, so fn must write only to per-index slots;
// under that contract the result is independent of thread count and
// scheduling.  Exceptions thrown by fn are rethrown on the calling thread.
void parallel_for(std::size_t begin, std::size_t end, int threads,
                  const std::function<void(std::size_t)>& fn);

// Compensated (Kahan) accumulator.
struct KahanAccumulator {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }

    double value() const { return sum; }
};

// Sum of chunk_fn(c) over c in [0, n_chunks).  Chunk partials are computed in
// parallel but combined in chunk order with compensated addition, so the
// result is byte-identical for any thread count.
double deterministic_chunk_sum(std::size_t n_chunks, int threads,
                               const std::function<double(std::size_t)>& chunk_fn);

} // namespace knnsampler
