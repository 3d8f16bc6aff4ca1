#pragma once

#include <cstddef>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cvar {

/// jobs <= 0 means "use the hardware".
inline int resolve_jobs(int jobs) {
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Index-parallel map. Each index writes only its own slot, so results are
/// identical for any job count; reductions happen serially afterwards.
template <class F>
void parallel_for_index(std::size_t count, int jobs, F&& body) {
  jobs = resolve_jobs(jobs);
#ifdef _OPENMP
  if (jobs > 1 && count > 1) {
    const long long nn = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
    for (long long i = 0; i < nn; ++i) body(static_cast<std::size_t>(i));
    return;
  }
#endif
  for (std::size_t i = 0; i < count; ++i) body(i);
}

}  // namespace cvar
