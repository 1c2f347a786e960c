#pragma once

#include <functional>

namespace facetrace {

// Worker count: explicit request, else FACETRACE_THREADS, else
// hardware_concurrency.
int worker_count(int requested = 0);

// Runs fn(begin..end) split into contiguous chunks across `workers` threads.
// Chunk boundaries depend only on (begin, end, workers), so any writes into
// per-index slots are deterministic.
void parallel_for(int begin, int end, int workers,
                  const std::function<void(int, int)>& fn);

} // namespace facetrace
