#include "uada/parallel.hpp"

#include <omp.h>

#include <stdexcept>

namespace uada {

void set_worker_count(int n) {
  if (n < 1) throw std::invalid_argument("worker count must be >= 1");
  omp_set_num_threads(n);
}

int worker_count() { return omp_get_max_threads(); }

}  // namespace uada
