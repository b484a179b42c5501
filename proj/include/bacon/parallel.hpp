#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace bacon {

// Worker cap shared by every parallel loop. 1 (the default) runs inline.
inline std::atomic<int>& thread_limit() {
  static std::atomic<int> n{1};
  return n;
}

inline void set_thread_limit(int n) { thread_limit() = std::max(1, n); }

// Calls fn(begin, end) on contiguous blocks of [0, n). Block boundaries depend
// only on n and the thread limit, so per-index work gives identical results for
// any scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::min<long>(thread_limit().load(), static_cast<long>(n)));
  if (workers <= 1) {
    if (n) fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          fn(n * w / workers, n * (w + 1) / workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace bacon
