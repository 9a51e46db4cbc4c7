#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace mixtac {

// Worker count: explicit request, else MIXTAC_THREADS, else hardware.
inline int thread_budget(int requested = 0) {
    int n = requested;
    if (n <= 0) {
        if (const char* env = std::getenv("MIXTAC_THREADS")) n = std::atoi(env);
    }
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    return n > 0 ? n : 1;
}

// Index-parallel loop. Work items must be independent; anything order
// sensitive (gradient reduction, file manifests) happens after the join, in
// index order, so results do not depend on scheduling.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    pool.reserve(nw);
    for (std::size_t w = 1; w < nw; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

} // namespace mixtac
