#include <ckdpipe/parallel.hpp>

namespace ckdpipe {

namespace {
std::atomic<std::size_t> configured_threads{0};
}

void set_worker_threads(std::size_t n) noexcept {
    configured_threads = n;
}

std::size_t worker_threads() noexcept {
    const std::size_t n = configured_threads.load();
    if (n != 0) {
        return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

} // namespace ckdpipe
