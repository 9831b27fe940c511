#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace angletl {

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Runs body(i) for i in [0, count). threads <= 1 executes the plain
/// serial loop, which is the reference implementation the tests compare
/// the OpenMP path against. Bodies must write to disjoint slots; with
/// that contract both paths produce bit-identical results.
template <class F>
void parallel_for(std::int64_t count, int threads, F&& body) {
  if (threads <= 1) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) body(i);
#else
  for (std::int64_t i = 0; i < count; ++i) body(i);
#endif
}

}  // namespace angletl
