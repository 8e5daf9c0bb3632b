#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace tensorlite {

namespace detail {

inline int threads_from_env() {
    if (const char* env = std::getenv("TENSORLITE_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (const std::exception&) {
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

inline std::atomic<int>& thread_setting() {
    static std::atomic<int> n{threads_from_env()};
    return n;
}

}  // namespace detail

/// Kernel thread cap. Initialized from TENSORLITE_THREADS, else the
/// hardware concurrency.
inline int num_threads() { return detail::thread_setting().load(std::memory_order_relaxed); }

inline void set_num_threads(int n) { detail::thread_setting().store(std::max(1, n), std::memory_order_relaxed); }

/// Work below this many elements always runs on the calling thread.
inline constexpr std::int64_t kParallelGrain = std::int64_t{1} << 15;

/// Fixed partition used by full reductions. Independent of the thread
/// count so that partial sums combine identically however many threads run.
inline constexpr std::int64_t kReduceChunk = std::int64_t{1} << 15;

/// Runs `fn(chunk)` for every chunk in [0, chunks). Chunks are handed out
/// dynamically; callers must not depend on which thread runs which chunk.
template <class Fn>
void parallel_chunks(std::int64_t chunks, Fn&& fn) {
    const int threads = static_cast<int>(std::min<std::int64_t>(num_threads(), chunks));
    if (threads <= 1) {
        for (std::int64_t c = 0; c < chunks; ++c) fn(c);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        try {
            for (std::int64_t c; (c = next.fetch_add(1)) < chunks;) fn(c);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    pool.clear();
    if (error) std::rethrow_exception(error);
}

/// Splits [0, n) into contiguous ranges and runs `fn(begin, end)` on each.
template <class Fn>
void parallel_for(std::int64_t n, Fn&& fn, std::int64_t grain = kParallelGrain) {
    if (n <= 0) return;
    if (n <= grain || num_threads() <= 1) {
        fn(std::int64_t{0}, n);
        return;
    }
    const std::int64_t chunks = (n + grain - 1) / grain;
    parallel_chunks(chunks, [&](std::int64_t c) {
        const std::int64_t begin = c * grain;
        fn(begin, std::min(n, begin + grain));
    });
}

}  // namespace tensorlite
