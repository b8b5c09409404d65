#pragma once

// Thread count from the AWCM_THREADS environment variable.

#include <cstdlib>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace awcm {

/// Number of worker threads in use (1 without OpenMP).
inline int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Applies AWCM_THREADS if set. Throws on a value that is not a positive integer.
inline void configure_threads_from_env() {
  const char* env = std::getenv("AWCM_THREADS");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1 || n > 4096) throw std::invalid_argument("AWCM_THREADS: expected a positive integer, got '" + std::string(env) + "'");
#ifdef _OPENMP
  omp_set_num_threads(static_cast<int>(n));
#endif
}

}  // namespace awcm
