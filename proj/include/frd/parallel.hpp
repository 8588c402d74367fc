#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace frd {

namespace detail {
inline std::atomic<unsigned>& thread_limit_storage() {
  static std::atomic<unsigned> limit{0};
  return limit;
}
}  // namespace detail

/// Global cap on worker threads; 0 means hardware concurrency.
inline void set_thread_limit(unsigned n) { detail::thread_limit_storage() = n; }

inline unsigned thread_count() {
  const unsigned limit = detail::thread_limit_storage();
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return limit == 0 ? hw : limit;
}

/// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker,
/// so writes to per-index output slots are race free and the result does not
/// depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(thread_count(), n == 0 ? 1 : n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    try {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = n;
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace frd
