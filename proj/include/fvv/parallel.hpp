#pragma once

#include <algorithm>
#include <ctime>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fvv {

// CPU time consumed by the calling thread, in milliseconds.
inline double thread_cpu_ms() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) * 1e3 + static_cast<double>(ts.tv_nsec) * 1e-6;
}

// Runs fn(i) for i in [0, n) across hardware threads; rethrows the first failure.
// Returns the CPU time spent on worker threads (0 when everything ran on the caller).
template <typename Fn>
double parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return 0.0;
  }
  std::exception_ptr failure;
  std::mutex mu;
  double cpu = 0.0;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      const double start = thread_cpu_ms();
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
          break;
        }
      }
      std::lock_guard lock(mu);
      cpu += thread_cpu_ms() - start;
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return cpu;
}

}  // namespace fvv
