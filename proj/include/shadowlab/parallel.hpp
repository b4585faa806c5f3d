#pragma once

#include <cstddef>
#include <functional>

namespace shadow {

/// Cap on worker threads used by parallel loops (0 = hardware concurrency).
void set_max_threads(unsigned n);
unsigned max_threads();

/// Run body(i) for i in [0, n). Iterations may execute concurrently and in
/// any order; callers write results by index so the output is independent of
/// scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace shadow
