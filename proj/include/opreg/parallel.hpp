#pragma once

#include <cstddef>
#include <functional>

namespace opreg {

// Number of worker threads: OPREG_WORKERS env var if set, otherwise the
// hardware concurrency (at least 1).
unsigned worker_count();

// Runs body(i) for i in [0, count) across worker threads. Callers must keep
// results in per-index slots; any reduction is done afterwards in index
// order, so output never depends on the worker count. The first exception
// thrown by a body is rethrown after all threads join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace opreg
