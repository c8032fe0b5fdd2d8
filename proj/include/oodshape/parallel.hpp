#pragma once

#include <cstddef>
#include <functional>

namespace oodshape {

/// Worker count: OODSHAPE_THREADS if set to a positive integer, else the
/// hardware concurrency.
std::size_t thread_count();

/// Calls `body(begin, end)` for consecutive blocks of `[0, n)` of size
/// `block` (the last may be shorter). Blocks are distributed over worker
/// threads; block boundaries never depend on the thread count, so callers
/// that reduce per block and then combine blocks in index order get
/// results independent of parallelism. The first exception thrown by any
/// block is rethrown on the calling thread.
void parallel_blocks(std::size_t n, std::size_t block,
                     const std::function<void(std::size_t, std::size_t)> &body);

} // namespace oodshape
