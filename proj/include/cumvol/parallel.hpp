#pragma once

#include <cstddef>
#include <functional>

namespace cumvol {

/// Worker threads to use: hardware concurrency, capped by CUMVOL_THREADS.
std::size_t worker_count();

/// Runs body(i) for i in [0, count) on up to worker_count() threads.
/// Any exception thrown by a task is rethrown on the calling thread.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace cumvol
