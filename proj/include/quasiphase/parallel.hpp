#pragma once

#include <cstddef>
#include <functional>

namespace quasiphase {

/// Worker count: hardware concurrency capped by QUASIPHASE_THREADS when set.
std::size_t thread_count();

/// Runs body(i) for i in [0, n) across thread_count() workers. Each index is
/// visited exactly once; callers write only to disjoint per-index storage.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace quasiphase
