#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace sfclab {

namespace detail {
inline std::atomic<unsigned> g_default_workers{0};
}

// Process-wide default worker count for parallel_for (0 = hardware
// concurrency). Results never depend on it; it only sets throughput.
inline void set_default_workers(unsigned n) { detail::g_default_workers.store(n); }
inline unsigned default_workers() { return detail::g_default_workers.load(); }

// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per
// worker. Results must be written to disjoint, preallocated slots so the
// outcome does not depend on scheduling. n_threads = 0 picks the process
// default, falling back to the hardware concurrency.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned n_threads = 0) {
    if (n == 0) return;
    unsigned workers = n_threads ? n_threads : default_workers();
    if (workers == 0) workers = std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    if (workers > n) workers = static_cast<unsigned>(n);
    if (workers == 1) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = static_cast<std::size_t>(w) * chunk;
        if (begin >= n) break;
        const std::size_t end = std::min(begin + chunk, n);
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace sfclab
