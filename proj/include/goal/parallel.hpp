#pragma once

#include <cstddef>
#include <functional>

namespace goal {

/// Worker count: GOAL_THREADS if set and positive, else hardware concurrency.
std::size_t thread_count();

/// Runs fn(i) for i in [0, n) on up to thread_count() threads. Callers write
/// results into per-index slots, so output order never depends on
/// scheduling. The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace goal
