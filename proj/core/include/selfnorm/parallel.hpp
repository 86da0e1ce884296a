#pragma once

#include <cstddef>
#include <functional>

namespace selfnorm {

/// Worker count: hardware concurrency, capped by SELFNORM_THREADS when set.
std::size_t worker_count();

/// Calls body(i) for i in [0, n) on up to worker_count() threads.
/// Indices are claimed dynamically; the first exception thrown is rethrown
/// after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace selfnorm
