#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace spde {

/// Runs f(i) for i in [0, n) on up to `jobs` threads with contiguous static chunks.
/// The first exception thrown by any worker is rethrown after all workers join.
template <class F>
void parallel_for(int n, int jobs, F&& f)
{
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i)
            f(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (int w = 0; w < jobs; ++w) {
        const int begin = static_cast<int>(static_cast<long long>(n) * w / jobs);
        const int end = static_cast<int>(static_cast<long long>(n) * (w + 1) / jobs);
        workers.emplace_back([&, begin, end] {
            try {
                for (int i = begin; i < end; ++i)
                    f(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
            }
        });
    }
    for (auto& t : workers)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

/// Worker count used when the caller asks for 0.
inline int default_jobs()
{
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace spde
