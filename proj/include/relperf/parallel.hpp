#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace relperf {

// Process-wide worker cap, set once by the CLI (--threads) or tests.
// Defaults to 1: parallelism is strictly opt-in.
inline std::atomic<int>& max_threads_slot() {
  static std::atomic<int> n{1};
  return n;
}

inline void set_max_threads(int n) { max_threads_slot().store(n < 1 ? 1 : n); }
inline int max_threads() { return max_threads_slot().load(); }

// Runs fn(i) for every i in [0, count). Each index receives inputs derived
// only from i (never from scheduling), and fn must write only to slot i of
// preallocated storage, so results are identical for any worker count.
// Nested calls run serially on the caller's thread.
inline void parallel_for(int count, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  thread_local bool inside = false;
  const int workers = std::min(max_threads(), count);
  if (inside || workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto body = [&]() {
    inside = true;
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
    inside = false;
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int t = 1; t < workers; ++t) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace relperf
