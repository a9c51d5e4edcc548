#pragma once

#include <cstdint>
#include <type_traits>

namespace debias {

// Worker count for data-parallel kernels: DEBIAS_THREADS if set, otherwise
// the hardware concurrency. Cached on first use.
int thread_budget();

// Run fn(i) for i in [0, n). Work is split into index ranges with disjoint
// writes; results do not depend on the thread count.
template <typename Fn>
void parallel_for(int64_t n, Fn&& fn);

namespace detail {
void run_parallel(int64_t n, void (*trampoline)(void*, int64_t, int64_t), void* ctx);
}

template <typename Fn>
void parallel_for(int64_t n, Fn&& fn) {
    auto trampoline = [](void* ctx, int64_t begin, int64_t end) {
        auto& f = *static_cast<std::remove_reference_t<Fn>*>(ctx);
        for (int64_t i = begin; i < end; ++i) f(i);
    };
    detail::run_parallel(n, trampoline, &fn);
}

} // namespace debias
