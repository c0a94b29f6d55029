#pragma once

#include <cstddef>
#include <functional>

namespace lmg {

// Number of workers to use: explicit request if > 0, otherwise the
// LMG_WORKERS environment variable, otherwise hardware concurrency.
std::size_t resolve_worker_count(std::size_t requested);

// Runs fn(i) for i in [0, count) on the given number of workers.
// Work items must be independent; callers store results keyed by i so
// the outcome is identical for any worker count. Exceptions thrown by
// work items are captured and the first one rethrown after join.
void parallel_for_index(std::size_t count, std::size_t workers,
                        const std::function<void(std::size_t)>& fn);

}  // namespace lmg
