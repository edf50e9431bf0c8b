#include "dpn/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dpn {

int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void for_each_index(int n, int threads, const std::function<void(int)>& fn) {
  if (threads == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
#ifdef _OPENMP
  int nt = threads == 0 ? omp_get_max_threads() : threads;
#pragma omp parallel for schedule(dynamic) num_threads(nt)
  for (int i = 0; i < n; ++i) fn(i);
#else
  for (int i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace dpn
