#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace ckdpipe {

/// Number of worker threads used by parallel_for. Overridable for tests; 0 means
/// std::thread::hardware_concurrency().
void set_worker_threads(std::size_t n) noexcept;
[[nodiscard]] std::size_t worker_threads() noexcept;

/// Calls body(i) for every i in [0, n). Each index writes only to its own output
/// slot, so results are independent of the schedule. The exception thrown by the
/// lowest failing index is rethrown.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
    const std::size_t workers = std::min(worker_threads(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto run = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers - 1);
        for (std::size_t t = 1; t < workers; ++t) {
            pool.emplace_back(run);
        }
        run();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace ckdpipe
