#pragma once
// Index-parallel loop over [0, n). Each index writes only its own slot, so
// callers reduce afterwards in index order and results do not depend on the
// schedule. OPENQ_THREADS caps the worker count.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace openq {

inline unsigned worker_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("OPENQ_THREADS")) {
        try {
            const long cap = std::stol(env);
            if (cap >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(cap));
        } catch (...) {
        }
    }
    return hw;
}

template <class F>
void parallel_for(std::size_t n, F&& body) {
    const unsigned nw = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
    if (nw <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(nw);
    for (unsigned w = 0; w < nw; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace openq
