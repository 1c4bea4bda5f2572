#pragma once

#include <cstddef>
#include <functional>

namespace scopelens {

/// Worker count used when a caller passes threads = 0: SCOPELENS_THREADS if
/// set and positive, else the hardware concurrency.
int default_threads();

/// Runs body(i) for i in [0, count) on up to `threads` workers. Indices are
/// handed out dynamically; results must be written to per-index slots so the
/// outcome does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace scopelens
