#pragma once

#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rclab {

enum class ExecMode { Serial, Parallel };

inline int worker_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_worker_count(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// Runs f(0..n-1). Results must go into preallocated per-index slots; the
// outputs are then independent of scheduling, so serial and parallel runs
// agree bit for bit.
template <class F>
void for_each_replica(ExecMode mode, int n, F&& f) {
  if (mode == ExecMode::Serial || n <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
#ifdef _OPENMP
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      f(i);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
#else
  for (int i = 0; i < n; ++i) f(i);
#endif
}

}  // namespace rclab
