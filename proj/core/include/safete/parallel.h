#ifndef SAFETE_PARALLEL_H_
#define SAFETE_PARALLEL_H_

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace safete {

// Worker pool size: SAFETE_THREADS if set to a positive integer, otherwise
// the hardware concurrency (at least 1).
inline int WorkerCount() {
  if (const char* env = std::getenv("SAFETE_THREADS")) {
    try {
      int v = std::stoi(env);
      if (v > 0) return v;
    } catch (...) {
    }
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = WorkerCount()).
// Work items are claimed in index order; callers write results into
// preallocated slots so output order never depends on scheduling. The first
// exception thrown by any item is rethrown after all workers join.
template <class F>
void ParallelFor(size_t n, int threads, F&& fn) {
  if (threads <= 0) threads = WorkerCount();
  const size_t workers = std::min<size_t>(static_cast<size_t>(threads), n);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t t = 0; t < workers; ++t) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace safete

#endif  // SAFETE_PARALLEL_H_
