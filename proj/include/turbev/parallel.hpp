#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace turbev {

/// Thread budget for the data-parallel kernels. Every kernel partitions its
/// work into index ranges whose results are combined in index order, so the
/// output never depends on `threads`.
struct Exec {
  unsigned threads = 1;
};

/// Calls `fn(begin, end)` over contiguous chunks of [0, n).
template <typename Fn>
void parallel_for(std::size_t n, Exec exec, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, exec.threads), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace turbev
