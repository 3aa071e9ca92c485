#pragma once

#include <cstddef>
#include <functional>

namespace watl {

// WATL_THREADS when set to a positive integer, otherwise
// std::thread::hardware_concurrency().
std::size_t default_thread_count();

// Runs fn(i) for i in [begin, end) on up to `threads` workers. Work items
// must not touch shared mutable state except through their own index; the
// first exception thrown by any item is rethrown after all workers join.
void parallel_for(std::size_t begin, std::size_t end, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace watl
