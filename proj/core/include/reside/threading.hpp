#pragma once

#include <cstddef>
#include <functional>

namespace reside {

/// Number of worker threads used by parallel sections; 0 = hardware count.
void set_worker_threads(unsigned n);
unsigned worker_threads();

/// Runs fn(i) for i in [0, n) on up to worker_threads() threads. Each index
/// runs exactly once; callers are responsible for making writes disjoint.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace reside
