#include "knnsampler/parallel.hpp"

#include <atomic>
#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace knnsampler {

int default_threads() {
    if (const char* env = std::getenv("KNNSAMPLER_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) {
            return v;
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

int effective_threads(int requested) {
    return requested > 0 ? requested : default_threads();
}

void parallel_for(std::size_t begin, std::size_t end, int threads,
                  const std::function<void(std::size_t)>& fn) {
    if (begin >= end) {
        return;
    }
    const std::size_t count = end - begin;
    const int workers = std::min<std::size_t>(effective_threads(threads), count);
    if (workers <= 1) {
        for (std::size_t i = begin; i < end; ++i) {
            fn(i);
        }
        return;
    }

    constexpr std::size_t kBlock = 16;
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        for (;;) {
            const std::size_t start = cursor.fetch_add(kBlock, std::memory_order_relaxed);
            if (start >= count) {
                return;
            }
            const std::size_t stop = std::min(start + kBlock, count);
            try {
                for (std::size_t i = start; i < stop; ++i) {
                    fn(begin + i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                cursor.store(count, std::memory_order_relaxed);
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers) - 1);
    for (int t = 1; t < workers; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& th : pool) {
        th.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

double deterministic_chunk_sum(std::size_t n_chunks, int threads,
                               const std::function<double(std::size_t)>& chunk_fn) {
    std::vector<double> partial(n_chunks, 0.0);
    parallel_for(0, n_chunks, threads, [&](std::size_t c) { partial[c] = chunk_fn(c); });
    KahanAccumulator acc;
    for (double p : partial) {
        acc.add(p);
    }
    return acc.value();
}

} // namespace knnsampler
