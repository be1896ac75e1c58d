#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace msinfer {

namespace detail {
inline std::atomic<int>& thread_count_slot() {
    static std::atomic<int> count{0}; // 0 = auto
    return count;
}
} // namespace detail

inline void set_default_thread_count(int n) { detail::thread_count_slot().store(n); }

inline int default_thread_count() {
    int n = detail::thread_count_slot().load();
    if (n > 0) return n;
    if (const char* env = std::getenv("MSINFER_THREADS")) {
        const int parsed = std::atoi(env);
        if (parsed > 0) return parsed;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(i) for i in [0, n). Each index must be independent; work is pulled
// from a shared atomic counter in blocks, so the set of computed results is
// identical for any thread count.
template <typename F>
void parallel_for(std::size_t n, F&& fn, int threads = 0) {
    if (n == 0) return;
    if (threads <= 0) threads = default_thread_count();
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t grain = std::max<std::size_t>(1, n / (workers * 8));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t begin = next.fetch_add(grain);
                if (begin >= n || failed.load()) return;
                const std::size_t end = std::min(begin + grain, n);
                try {
                    for (std::size_t i = begin; i < end; ++i) fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed.load() && error) std::rethrow_exception(error);
}

} // namespace msinfer
