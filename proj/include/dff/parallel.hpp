#pragma once

#include <cstddef>
#include <functional>

namespace dff {

/// Worker count used by parallel_for. Defaults to 1; 0 means hardware
/// concurrency.
void set_thread_count(int threads);
int thread_count();

/// Runs body(i) for i in [0, n). Iterations must be independent; results
/// must not depend on scheduling order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace dff
