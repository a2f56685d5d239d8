#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace glint {

// Static block partition over [0, count). The work must be schedule-invariant
// (pure per index), so results do not depend on the thread count.
inline void parallel_for(int64_t count, int threads, const std::function<void(int64_t)>& fn) {
    if (threads <= 1 || count < 2) {
        for (int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const int n = std::min<int64_t>(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (int t = 0; t < n; ++t) {
        pool.emplace_back([=, &fn] {
            const int64_t lo = count * t / n;
            const int64_t hi = count * (t + 1) / n;
            for (int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

inline int default_thread_count() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 4 : static_cast<int>(hw);
}

}  // namespace glint
