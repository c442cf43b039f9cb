#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ethtrust {

// Runs fn(0) .. fn(n_tasks-1) on up to n_threads workers. Tasks may have very
// uneven cost (grid cells train different tree counts), so scheduling is a
// shared atomic counter. Callers must make task outputs land in per-index
// slots; then results do not depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t n_tasks, int n_threads, Fn&& fn) {
    if (n_tasks == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(n_tasks, n_threads <= 1 ? 1 : static_cast<std::size_t>(n_threads));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_tasks || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ethtrust
