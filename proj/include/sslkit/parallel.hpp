#pragma once

#include <cstddef>
#include <functional>

namespace sslkit {

// Worker cap: SSLKIT_THREADS when set and positive, else hardware concurrency.
std::size_t worker_count();

// Runs fn(i) for i in [0, n) over contiguous chunks. Callers write results into
// per-index slots and reduce in index order afterwards, so results do not
// depend on the worker count. The first exception thrown by a worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace sslkit
