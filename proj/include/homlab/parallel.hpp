#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace homlab {

/// Worker count: HOMLAB_WORKERS env var, else hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("HOMLAB_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Run fn(i) for i in [0, n) on a small thread team. Tasks must write only to
/// their own slot of any shared output, which keeps the merge order-independent.
template <typename Fn>
void parallel_for(std::size_t n, const Fn& fn, int workers = 0) {
    if (workers <= 0) workers = worker_count();
    if (n == 0) return;
    if (workers == 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> team;
    const int nthreads = static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(workers)));
    team.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) team.emplace_back(body);
    for (auto& th : team) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace homlab
