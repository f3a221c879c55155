#include "dyetest/parallel.hpp"

#include <atomic>
#include <exception>

#include <omp.h>

namespace dyetest {

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }

    const int threads = jobs <= 0 ? omp_get_max_threads() : jobs;
    std::exception_ptr first_error = nullptr;
    std::atomic<bool> failed{false};

#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (long long i = 0; i < static_cast<long long>(count); ++i) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            if (!failed.exchange(true)) first_error = std::current_exception();
        }
    }

    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace dyetest
