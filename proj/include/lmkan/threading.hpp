#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace lmkan {

// Worker count: LMKAN_THREADS env var if set, else hardware concurrency.
inline std::size_t worker_count() {
    if (const char* env = std::getenv("LMKAN_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<std::size_t>(n);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

// Split [0, n) into contiguous chunks, one per worker. fn(begin, end, worker)
// runs on each chunk; worker indices are stable, so per-worker scratch merged
// in index order gives run-to-run identical reductions at a fixed count.
inline void parallel_for(std::size_t n,
                         const std::function<void(std::size_t, std::size_t, std::size_t)>& fn,
                         std::size_t workers = 0) {
    if (workers == 0) workers = worker_count();
    workers = std::max<std::size_t>(1, std::min(workers, n == 0 ? 1 : n));
    if (workers == 1) {
        fn(0, n, 0);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t b = std::min(n, w * chunk);
        const std::size_t e = std::min(n, b + chunk);
        pool.emplace_back([&fn, b, e, w] { fn(b, e, w); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace lmkan
