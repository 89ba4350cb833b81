// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vsa {

// Runs fn(i) for i in [0, n). Work items must write disjoint outputs and
// must not depend on which thread executes them; results are then identical
// for any thread count.
template <typename Fn>
void parallel_for(Eigen::Index n, Fn&& fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) fn(i);
#else
  for (Eigen::Index i = 0; i < n; ++i) fn(i);
#endif
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_num_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace vsa
