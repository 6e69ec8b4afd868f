#pragma once

#include <cstddef>
#include <functional>

namespace splatgeo {

// Worker count used when a caller passes 0. Reads SPLATGEO_THREADS, falling
// back to the hardware concurrency.
int default_thread_count();

int resolve_threads(int requested);

// Runs fn(i) for i in [0, n) on up to `threads` workers. Every index is
// processed exactly once, so results written per index are independent of the
// worker count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

} // namespace splatgeo
