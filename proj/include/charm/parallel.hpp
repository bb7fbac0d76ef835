#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace charm {

/// Worker cap: CHARM_THREADS if set, otherwise the hardware concurrency.
inline unsigned worker_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("CHARM_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    return hw;
}

/**
 * @brief Run fn(i) for i in [0, n) across worker_count() threads.
 *
 * Work is split into contiguous index ranges. fn must only write to state
 * owned by index i, so results are independent of the thread count.
 */
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const auto workers = std::min<std::size_t>(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            const auto lo = n * w / workers, hi = n * (w + 1) / workers;
            try {
                for (auto i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace charm
