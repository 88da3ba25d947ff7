#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fawn::detail {

// Worker cap for every parallel_for below. 0 = all cores.
int& thread_cap_ref();
void set_thread_cap(int n);
int effective_threads();

// Static partition of [begin, end). Each index writes only its own
// outputs, so results do not depend on the number of workers.
template <typename F>
void parallel_for(std::int64_t begin, std::int64_t end, F&& f) {
#ifdef _OPENMP
    int nt = effective_threads();
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::int64_t i = begin; i < end; ++i) f(i);
#else
    for (std::int64_t i = begin; i < end; ++i) f(i);
#endif
}

}  // namespace fawn::detail
