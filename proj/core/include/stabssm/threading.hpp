#pragma once

#include <functional>

namespace stabssm {

/// Worker count: min(hardware concurrency, STABLE_SSM_THREADS when set).
int worker_count();

/// Runs fn(i) for i in [0, count) across workers. Iterations must be
/// independent; any exception is rethrown on the calling thread. Results
/// must be written to pre-sized per-index slots so that the outcome does
/// not depend on the worker count.
void parallel_for(int count, const std::function<void(int)>& fn);

}  // namespace stabssm
