#pragma once

// Replication fan-out: tasks own derived seeds and private state, results are
// written by task index so the merged output is independent of scheduling.

#include <atomic>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace otproj {

inline std::size_t default_threads() {
  if (const char* env = std::getenv("OTPROJ_THREADS")) {
    const long v = std::atol(env);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

inline void parallel_for(std::size_t count, std::size_t threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  const std::size_t workers = std::min(threads, count);
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

}  // namespace otproj
