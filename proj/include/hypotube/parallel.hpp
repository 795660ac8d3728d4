#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace hypotube {

/// Size of the work pool. HYPOTUBE_THREADS caps it; read at call time so
/// tests can change the cap between runs.
inline unsigned thread_cap() {
    if (const char* env = std::getenv("HYPOTUBE_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

/// Runs body(i) for i in [0, n) over the work pool, each worker taking one
/// contiguous index range. Callers must write results to disjoint per-index
/// slots; together with counter-based RNG streams this makes every ensemble
/// independent of the thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    const std::size_t workers = std::min<std::size_t>(thread_cap(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = n * w / workers;
        const std::size_t end = n * (w + 1) / workers;
        pool.emplace_back([begin, end, &body] {
            for (std::size_t i = begin; i < end; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace hypotube
