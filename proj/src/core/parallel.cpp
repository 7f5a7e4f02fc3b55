#include "segprop/core/parallel.hpp"

#include <omp.h>

namespace segprop {

namespace {
int g_default_threads = 0;
}

void set_num_threads(int threads) {
  if (g_default_threads == 0) g_default_threads = omp_get_max_threads();
  omp_set_num_threads(threads > 0 ? threads : g_default_threads);
}

int num_threads() { return omp_get_max_threads(); }

}  // namespace segprop
