#pragma once

#include <Eigen/Core>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace gridhmc {

// Runs body(i) for i in [0, count). With threads > 1 the work is chunked over
// a shared counter; results must go to disjoint slots so the outcome is
// schedule-independent. The first exception thrown by any worker is rethrown.
inline void parallel_over(Eigen::Index count, int threads,
                          const std::function<void(Eigen::Index)>& body) {
  if (threads <= 1 || count < 2) {
    for (Eigen::Index i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<Eigen::Index> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  constexpr Eigen::Index chunk = 64;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      try {
        for (Eigen::Index i = next.fetch_add(chunk); i < count; i = next.fetch_add(chunk)) {
          const Eigen::Index end = std::min(i + chunk, count);
          for (Eigen::Index j = i; j < end; ++j) body(j);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace gridhmc
