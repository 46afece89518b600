#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace egoqa {

// Hot kernels come in two builds: a serial reference implementation and an
// OpenMP one. The parallel path must produce bit-identical results to the
// reference (integer reductions, deterministic argmin/argmax tie-breaks);
// the test suite asserts this on every kernel.
enum class Exec { serial, parallel };

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace egoqa
