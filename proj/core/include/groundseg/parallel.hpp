#pragma once

#include <cstddef>
#include <functional>

namespace groundseg {

/// Number of worker threads used by parallel_for. Defaults to 1.
int thread_count();
void set_thread_count(int n);

/// Runs body(i) for i in [0, n). Work is split into contiguous static
/// blocks so each index is handled by exactly one worker; callers write
/// results into pre-sized slots, which keeps outputs independent of the
/// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace groundseg
