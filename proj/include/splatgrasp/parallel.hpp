#pragma once

#include <cstddef>
#include <functional>

namespace splatgrasp {

/// Process-wide worker count used by parallel_for. 0 or 1 means sequential.
void set_thread_count(unsigned count);
unsigned thread_count();

/// Runs body(i) for i in [0, n). Work is split into contiguous static chunks;
/// calls made from inside a worker run sequentially on that worker;
/// callers only write to per-index outputs so results do not depend on the
/// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body);

} // namespace splatgrasp
