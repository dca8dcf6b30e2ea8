#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace zoneforge {

/// Worker count: ZONEFORGE_THREADS if set, else hardware concurrency.
inline int default_threads() {
    if (const char* env = std::getenv("ZONEFORGE_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Static block partition of [0, n) over the given worker count; fn receives
/// (index, worker). Results must not depend on scheduling: workers may only
/// write to disjoint output slots (the worker id addresses per-worker
/// scratch). fn must not throw.
template <typename Fn>
void parallel_for_workers(std::size_t n, int threads, Fn&& fn) {
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i, std::size_t{0});
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = n * w / workers;
        const std::size_t hi = n * (w + 1) / workers;
        pool.emplace_back([lo, hi, w, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i, w);
        });
    }
    for (auto& t : pool) t.join();
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    parallel_for_workers(n, threads, [&fn](std::size_t i, std::size_t) { fn(i); });
}

} // namespace zoneforge
