#pragma once

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hsm {

namespace detail {
inline int& thread_budget() {
  thread_local int n = 1;
  return n;
}
}  // namespace detail

/// Number of worker threads parallel_for uses on the calling thread.
inline int worker_threads() { return detail::thread_budget(); }

/// Sets the worker count for the current thread until destroyed.
class ThreadScope {
 public:
  explicit ThreadScope(int threads) : saved_(detail::thread_budget()) {
    detail::thread_budget() = std::max(1, threads);
  }
  ~ThreadScope() { detail::thread_budget() = saved_; }
  ThreadScope(const ThreadScope&) = delete;
  ThreadScope& operator=(const ThreadScope&) = delete;

 private:
  int saved_;
};

/// Runs f(i) for i in [0, n). Each index must write disjoint output, which
/// keeps results independent of the thread count.
template <typename F>
void parallel_for(int n, F&& f) {
  const int threads = std::min(worker_threads(), n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for num_threads(threads) schedule(static)
  for (int i = 0; i < n; ++i) f(i);
#else
  for (int i = 0; i < n; ++i) f(i);
#endif
}

}  // namespace hsm
