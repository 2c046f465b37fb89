#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace uada {

/// Sets the OpenMP worker count for subsequent parallel regions (n >= 1).
void set_worker_count(int n);
int worker_count();

/// Runs fn(i) for i in [0, n) on the OpenMP pool. The first exception thrown by any
/// iteration is rethrown on the calling thread after the loop completes.
template <typename Fn>
void parallel_for(std::ptrdiff_t n, Fn&& fn) {
  std::exception_ptr error;
  std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace uada
