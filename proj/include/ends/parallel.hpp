#pragma once

// Order-preserving parallel map. Results land in their input slot, so output is
// independent of scheduling. ENDS_NUM_THREADS overrides the worker count.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ends {

inline unsigned worker_count() {
    if (const char* env = std::getenv("ENDS_NUM_THREADS")) {
        try {
            const long n = std::stol(env);
            if (n >= 1) return static_cast<unsigned>(std::min(n, 256L));
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// out[i] = f(i) for i < n. The first exception thrown by any task is rethrown.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, const F& f, unsigned threads = worker_count()) {
    std::vector<T> out(n);
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                out[i] = f(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return out;
}

} // namespace ends
