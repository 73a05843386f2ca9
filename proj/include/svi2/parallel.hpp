#pragma once

// Deterministic work-sharing helper. Tasks write into caller-owned slots
// indexed by i, so results never depend on scheduling; reductions stay with
// the caller and run in fixed order.

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace svi2 {

inline int hardware_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// Runs fn(i) for i in [0, count). With threads <= 1 this is a plain loop.
// If any task throws, the exception from the lowest failing index is
// rethrown after all workers finish.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  if (count <= 0) return;
  threads = std::clamp(threads, 1, count);
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }

  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) break;
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace svi2
