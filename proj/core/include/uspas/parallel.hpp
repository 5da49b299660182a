#pragma once

#include <cstddef>
#include <functional>

namespace uspas {

/// Worker count used when a caller passes 0. Initialized from the
/// USPAS_THREADS environment variable, else hardware concurrency.
int default_thread_count();
void set_default_thread_count(int threads);

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = default).
/// Indices are handed out dynamically; callers write results by index so the
/// outcome does not depend on scheduling. The first exception thrown by any
/// body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  int threads = 0);

}  // namespace uspas
