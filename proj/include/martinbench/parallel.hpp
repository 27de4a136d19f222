#pragma once

#include <cstddef>
#include <functional>

namespace martinbench {

/// Number of worker threads used by parallel_for (default: hardware concurrency).
void set_thread_count(int n);
int thread_count();

/// Runs body(lo, hi) over [begin, end) split into fixed-size chunks.
///
/// Chunk boundaries depend only on the range and `grain`, never on the thread
/// count, so callers that write disjoint outputs per index get identical
/// results for any degree of parallelism.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t grain = 4096);

}  // namespace martinbench
