#pragma once

namespace discreg {

/// Worker threads used by the voxel- and label-parallel kernels. Results never
/// depend on this value; only wall-clock time does.
void set_thread_count(int n);
int thread_count();

} // namespace discreg
