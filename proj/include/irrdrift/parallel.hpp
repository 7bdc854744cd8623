#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace irrdrift {

// Global worker count for ensemble loops. 0 means hardware concurrency.
inline unsigned& thread_count() {
    static unsigned n = 0;
    return n;
}

inline unsigned effective_threads() {
    unsigned n = thread_count();
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

// Runs fn(i) for i in [0, count). Work is split into fixed chunks so that
// any per-chunk state can be merged in chunk order afterwards; results must
// not depend on which thread ran which chunk.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    unsigned workers = effective_threads();
    if (workers <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::size_t chunk = (count + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        std::size_t lo = static_cast<std::size_t>(w) * chunk;
        std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace irrdrift
