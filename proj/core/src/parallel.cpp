#include "debias/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace debias {

int thread_budget() {
    static const int budget = [] {
        if (const char* env = std::getenv("DEBIAS_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return v;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? static_cast<int>(hw) : 1;
    }();
    return budget;
}

namespace detail {

void run_parallel(int64_t n, void (*trampoline)(void*, int64_t, int64_t), void* ctx) {
    if (n <= 0) return;
    int workers = std::min<int64_t>(thread_budget(), n);
    if (workers <= 1) {
        trampoline(ctx, 0, n);
        return;
    }
    // Fixed block partition: chunk boundaries depend only on n and workers,
    // and every index is written by exactly one worker.
    int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers - 1));
    for (int w = 1; w < workers; ++w) {
        int64_t begin = w * chunk;
        int64_t end = std::min<int64_t>(begin + chunk, n);
        if (begin >= end) break;
        pool.emplace_back([=] { trampoline(ctx, begin, end); });
    }
    trampoline(ctx, 0, std::min<int64_t>(chunk, n));
    for (auto& t : pool) t.join();
}

} // namespace detail
} // namespace debias
