#pragma once

#include <cstddef>
#include <functional>

namespace gtd {

/// Number of workers to use for a requested count; 0 or negative means all cores.
int resolve_threads(int requested);

/// Calls body(k) for k in [0, n) on up to `threads` workers. The first exception
/// thrown by any call is rethrown after all workers have stopped.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace gtd
