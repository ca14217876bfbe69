#pragma once

#include <cstddef>
#include <functional>

namespace fsmean {

/// Worker count used by parallel_for; 1 runs everything inline.
void set_num_threads(int n);
int num_threads();

/// Calls fn(i) for i in [0, n). Indices are handed out dynamically; callers
/// write results by index and reduce afterwards in index order, so results do
/// not depend on the thread count. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fsmean
