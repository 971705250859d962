#pragma once

#include <cstdlib>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace waydcm {

// Worker cap for data-parallel kernels. WAYDCM_THREADS overrides the OpenMP
// default; builds without OpenMP always run serially.
inline int thread_cap() {
#ifdef _OPENMP
  int cap = omp_get_max_threads();
  if (const char* env = std::getenv("WAYDCM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) cap = n;
  }
  return cap < 1 ? 1 : cap;
#else
  return 1;
#endif
}

// Runs fn(i) for i in [0, n). Iterations must be independent; callers that
// reduce must write per-index slots and fold them serially afterwards so
// results do not depend on the schedule.
template <typename F>
void parallel_for(std::size_t n, F&& fn) {
#ifdef _OPENMP
  const int cap = thread_cap();
  if (cap > 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(cap)
    for (long long i = 0; i < (long long)n; ++i) fn(std::size_t(i));
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

}  // namespace waydcm
