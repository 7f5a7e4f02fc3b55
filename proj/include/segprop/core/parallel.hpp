#pragma once

namespace segprop {

// Worker count used by the OpenMP loops in every module. 0 restores the
// runtime default. Kernels only parallelize over independent rows/entries,
// so results do not depend on this setting.
void set_num_threads(int threads);
int num_threads();

}  // namespace segprop
