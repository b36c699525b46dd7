#include "unest/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace unest {

int thread_budget() {
  static const int budget = [] {
    if (const char* env = std::getenv("UNEST_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1) return std::min(v, 64);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(std::min(hw, 64u));
  }();
  return budget;
}

void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  const int budget = thread_budget();
  if (budget <= 1 || grain == 0 || n <= grain) {
    body(0, n);
    return;
  }
  const std::size_t max_chunks = (n + grain - 1) / grain;
  const std::size_t chunks =
      std::min<std::size_t>(static_cast<std::size_t>(budget), max_chunks);
  if (chunks <= 1) {
    body(0, n);
    return;
  }
  const std::size_t per = (n + chunks - 1) / chunks;
  std::vector<std::thread> workers;
  workers.reserve(chunks - 1);
  for (std::size_t c = 1; c < chunks; ++c) {
    const std::size_t begin = c * per;
    const std::size_t end = std::min(n, begin + per);
    if (begin >= end) break;
    workers.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(0, std::min(n, per));
  for (auto& w : workers) w.join();
}

}  // namespace unest
