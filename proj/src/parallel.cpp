#include "splatgrasp/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace splatgrasp {

namespace {
std::atomic<unsigned> gThreadCount{1};
thread_local bool tInsideWorker = false;
}

void set_thread_count(unsigned count) { gThreadCount.store(std::max(1u, count)); }

unsigned thread_count() { return gThreadCount.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body) {
    const std::size_t workers = std::min<std::size_t>(thread_count(), n);
    if (workers <= 1 || tInsideWorker) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }

    std::exception_ptr firstError;
    std::mutex errorMutex;
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&, begin, end] {
            tInsideWorker = true;
            try {
                for (std::size_t i = begin; i < end; ++i) body(i);
            } catch (...) {
                std::lock_guard lock(errorMutex);
                if (!firstError) firstError = std::current_exception();
            }
        });
    }
    for (auto &t : threads) t.join();
    if (firstError) std::rethrow_exception(firstError);
}

} // namespace splatgrasp
