#pragma once

#include <functional>

namespace ngmix {

/// Calls fn(i) for i in [0, n) on up to `threads` workers (contiguous chunks).
/// The first exception thrown by any call is rethrown after all workers finish.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

/// --threads value, else NGMIX_THREADS, else 1.
int resolve_threads(int requested);

}  // namespace ngmix
