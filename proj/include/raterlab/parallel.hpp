#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace raterlab {

/// Thread count to use: RATERLAB_THREADS wins over `requested`; 0 means
/// hardware concurrency.
std::size_t resolve_threads(std::size_t requested);

/// Default worker count for library calls that take no explicit count.
std::size_t default_threads();
void set_default_threads(std::size_t n);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Work is split in
/// contiguous blocks; callers write results by index so the outcome does not
/// depend on the schedule. The first exception thrown by a body is rethrown.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    threads = std::min(threads, n);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t lo = n * t / threads;
        const std::size_t hi = n * (t + 1) / threads;
        workers.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    workers.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace raterlab
