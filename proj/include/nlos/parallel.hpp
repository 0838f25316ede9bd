#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nlos {

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
  static std::atomic<unsigned> cap{0};
  return cap;
}
}  // namespace detail

/// Caps worker threads used by parallel_for. 0 restores hardware concurrency.
inline void set_max_threads(unsigned n) { detail::thread_cap() = n; }

inline unsigned max_threads() {
  unsigned cap = detail::thread_cap();
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return cap == 0 ? hw : cap;
}

/// Runs body(i) for i in [0, n) over contiguous chunks. Each index is visited
/// exactly once, so bodies writing only to slot i are deterministic.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(max_threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace nlos
