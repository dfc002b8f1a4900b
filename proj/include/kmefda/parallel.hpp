#pragma once

#include <cstddef>
#include <functional>

namespace kmefda {

/// Runs body(i) for i in [0, count) on up to `workers` threads (0 means one
/// per hardware thread). Work is handed out by an atomic counter; callers
/// write results into slot i so the outcome does not depend on scheduling.
/// If any call throws, the exception from the lowest index is rethrown.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

/// Number of threads parallel_for would use for `workers`.
int resolve_workers(int workers) noexcept;

}  // namespace kmefda
