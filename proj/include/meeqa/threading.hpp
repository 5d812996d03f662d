#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace meeqa {

// Worker count for per-question fan-out. Capped by MEEQA_TOOLKIT_THREADS.
inline int worker_count() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("MEEQA_TOOLKIT_THREADS")) {
        try {
            int cap = std::stoi(env);
            if (cap >= 1 && cap < hw) hw = cap;
            if (cap >= 1 && cap >= hw) hw = cap;
        } catch (...) {
            // unparsable value: ignore, keep hardware default
        }
    }
    return hw;
}

// Runs fn(i) for i in [0, n). Results must be written to pre-sized slots so
// the outcome is independent of the thread count.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
    int workers = worker_count();
    if (workers <= 1 || n < 2) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    if (workers > n) workers = static_cast<int>(n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (std::int64_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace meeqa
