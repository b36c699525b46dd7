#pragma once

#include <cstddef>
#include <functional>

namespace unest {

// Worker budget: UNEST_THREADS env var if set, else hardware concurrency.
// Cached after the first call.
int thread_budget();

// Runs body(begin, end) over a fixed partition of [0, n). The partition
// depends only on n, grain and the thread budget, and every index belongs to
// exactly one chunk, so results are identical for any budget as long as
// chunks write disjoint outputs. Small ranges run inline.
void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace unest
