#pragma once

#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rvt {

// Worker cap: RVT_THREADS when set, otherwise the hardware count.
inline int worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("RVT_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1 && static_cast<unsigned>(n) < hw) return n;
    if (n >= 1) return n;
  }
  return static_cast<int>(hw);
}

// Index-sharded loop. Each index is processed exactly once; callers write
// results into per-index slots so the outcome is independent of scheduling.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  const int workers = std::min(worker_count(), n > 0 ? n : 1);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace rvt
