#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace phylo::detail {

inline std::size_t resolve_threads(std::size_t requested) {
    if (requested != 0) return requested;
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n) over `threads` workers in contiguous chunks.
/// Results must be written to per-index slots; the first exception is rethrown.
template <typename Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
    threads = std::min(resolve_threads(threads), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        workers.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    workers.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace phylo::detail
