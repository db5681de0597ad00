#pragma once

#include <cstddef>
#include <functional>

namespace aelpn {

// Worker count for evaluation-side parallelism: AELPN_THREADS when set (>= 1),
// else the hardware concurrency, at least 1. Training stays sequential.
std::size_t thread_budget();

// Runs fn(0..n-1), splitting contiguous index ranges over thread_budget()
// workers. Iterations must be independent; callers keep determinism by
// writing to preallocated slots and reducing in index order afterwards.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace aelpn
