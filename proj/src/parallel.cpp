#include "lateralsim/parallel.hpp"

#include <cstdlib>
#include <string>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace lateralsim {

void set_thread_count(int n) {
#if defined(_OPENMP)
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int max_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int resolve_thread_count(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("LATERALSIM_THREADS")) {
    try {
      int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  return 0;
}

}  // namespace lateralsim
