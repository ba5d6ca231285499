#pragma once

#include <atomic>
#include <cstdlib>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sobd {

// Worker count: SOBD_THREADS env var, else hardware concurrency.
inline int& thread_count_ref() {
    static int count = [] {
        if (const char* env = std::getenv("SOBD_THREADS")) {
            int n = std::atoi(env);
            if (n > 0) return n;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? static_cast<int>(hw) : 1;
    }();
    return count;
}

inline int thread_count() { return thread_count_ref(); }
inline void set_thread_count(int n) { thread_count_ref() = n > 0 ? n : 1; }

// Runs fn(i) for i in [begin, end) across workers. Each index must write
// only to its own output slots; the work order is unspecified but outputs
// are then independent of scheduling, so results match a serial run.
template <typename Fn>
void parallel_for(std::int64_t begin, std::int64_t end, Fn&& fn) {
    const std::int64_t n = end - begin;
    if (n <= 0) return;
    const int workers = std::min<std::int64_t>(thread_count(), n);
    if (workers <= 1) {
        for (std::int64_t i = begin; i < end; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{begin};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        try {
            for (;;) {
                std::int64_t i = next.fetch_add(1);
                if (i >= end) break;
                fn(i);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    for (int t = 1; t < workers; ++t) threads.emplace_back(body);
    body();
    for (auto& th : threads) th.join();
    if (error) std::rethrow_exception(error);
}

// Deterministic parallel reduction. The index range is cut into at most 64
// fixed chunks (a function of n only, never of the worker count), each chunk
// is reduced independently, and partials are merged in chunk order. The
// floating-point summation order is therefore identical for any thread
// count, which keeps seeded pipelines bit-reproducible.
//
//   make_acc() -> Acc            fresh accumulator
//   accumulate(Acc&, i)          fold index i into a chunk accumulator
//   merge(Acc& into, Acc&& from) combine chunk partials, called in order
template <typename Acc, typename Make, typename Fold, typename Merge>
Acc parallel_chunked_reduce(std::int64_t n, Make&& make_acc, Fold&& accumulate, Merge&& merge) {
    Acc total = make_acc();
    if (n <= 0) return total;
    const std::int64_t chunk = (n + 63) / 64;
    const std::int64_t chunks = (n + chunk - 1) / chunk;
    std::vector<Acc> partials;
    partials.reserve(chunks);
    for (std::int64_t c = 0; c < chunks; ++c) partials.push_back(make_acc());
    parallel_for(0, chunks, [&](std::int64_t c) {
        const std::int64_t lo = c * chunk;
        const std::int64_t hi = std::min(n, lo + chunk);
        for (std::int64_t i = lo; i < hi; ++i) accumulate(partials[c], i);
    });
    for (std::int64_t c = 0; c < chunks; ++c) merge(total, std::move(partials[c]));
    return total;
}

}  // namespace sobd
