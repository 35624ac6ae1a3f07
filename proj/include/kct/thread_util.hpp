#ifndef KCT_THREAD_UTIL_HPP
#define KCT_THREAD_UTIL_HPP

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace kct {

// Chunked replication-parallel loop. Each index is processed exactly once and
// writes only to its own slot, so results are independent of the thread
// count; reductions happen afterwards in index order.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (std::size_t k = 0; k < t; ++k) {
        const std::size_t lo = n * k / t;
        const std::size_t hi = n * (k + 1) / t;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace kct

#endif  // KCT_THREAD_UTIL_HPP
