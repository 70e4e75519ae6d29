#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace bbm {

inline unsigned default_thread_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Replica results must
// be written into preallocated per-index slots by the caller's fn, and any
// reduction happens afterwards in index order, so output never depends on
// scheduling. If several replicas throw, the lowest index wins.
template <class Fn>
void parallel_for_indices(std::size_t n, unsigned threads, Fn&& fn) {
  if (n == 0) return;
  threads = std::min<std::size_t>(threads == 0 ? 1 : threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::pair<std::size_t, std::exception_ptr>> errors(threads,
                                                                 {n, nullptr});
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          if (errors[t].second == nullptr || i < errors[t].first)
            errors[t] = {i, std::current_exception()};
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  std::size_t first = n;
  std::exception_ptr eptr = nullptr;
  for (const auto& [idx, ep] : errors)
    if (ep != nullptr && idx < first) {
      first = idx;
      eptr = ep;
    }
  if (eptr) std::rethrow_exception(eptr);
}

}  // namespace bbm
