#pragma once

// Thin OpenMP shim. Kernels call these instead of omp_* directly so the
// library still builds (serially) without OpenMP.

namespace lateralsim {

// Sets the worker count for subsequent parallel kernels. n <= 0 keeps the
// runtime default.
void set_thread_count(int n);

int max_threads();

// Resolves --threads with LATERALSIM_THREADS as a fallback; 0 means default.
int resolve_thread_count(int flag_value);

}  // namespace lateralsim
