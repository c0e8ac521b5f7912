#pragma once

#include <cstddef>
#include <functional>

namespace koopeig {

/// Runs fn(i) for i in [0, count) on up to `threads` workers (0 means the
/// hardware concurrency). Work is split into contiguous chunks, and results
/// written by index do not depend on the thread count. If any call throws,
/// the exception from the lowest index is rethrown after all workers join.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace koopeig
