// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <exception>
#include <mutex>
#include <utility>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace espada {

/// Resolves a jobs request: <=0 means "use all hardware threads".
inline int effective_jobs(int jobs) {
#if defined(_OPENMP)
    if (jobs <= 0) return omp_get_max_threads();
    return jobs;
#else
    (void)jobs;
    return 1;
#endif
}

/// Runs fn(i) for i in [0, n). With OpenMP, iterations are distributed over
/// `jobs` threads; the serial path is the reference semantics and is used
/// whenever jobs == 1 or OpenMP is unavailable. The first exception thrown
/// by any iteration is rethrown on the calling thread.
template <class F>
void parallel_for(int n, int jobs, F&& fn) {
    const int threads = effective_jobs(jobs);
#if defined(_OPENMP)
    if (threads > 1 && n > 1) {
        std::exception_ptr first_error = nullptr;
        std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (int i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
        if (first_error) std::rethrow_exception(first_error);
        return;
    }
#else
    (void)threads;
#endif
    for (int i = 0; i < n; ++i) fn(i);
}

} // namespace espada
