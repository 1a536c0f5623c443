#pragma once

namespace lkld {

/// Worker count for the OpenMP kernels. Reads LKLD_THREADS once
/// (0 or unset = runtime default).
int worker_threads();

/// Overrides the worker count; 0 restores the LKLD_THREADS / runtime default.
void set_worker_threads(int n);

}  // namespace lkld
