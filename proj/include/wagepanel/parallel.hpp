#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace wagepanel {

/// Runs `fn(begin, end)` over contiguous slices of [0, n) on up to `threads`
/// threads. Callers must write disjoint outputs per index, so the result does
/// not depend on the thread count.
template <class Fn> void parallel_for(std::size_t n, int threads, Fn &&fn) {
  const std::size_t t = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, std::max<std::size_t>(n, 1));
  if (t <= 1 || n < 2) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(t - 1);
  const std::size_t chunk = (n + t - 1) / t;
  for (std::size_t k = 1; k < t; ++k) {
    const std::size_t b = std::min(n, k * chunk);
    const std::size_t e = std::min(n, b + chunk);
    if (b < e) {
      pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
  }
  fn(std::size_t{0}, std::min(n, chunk));
  for (auto &th : pool) {
    th.join();
  }
}

} // namespace wagepanel
