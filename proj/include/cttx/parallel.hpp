#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cttx {

/// Runs fn(block) for block in [0, n_blocks) on a small thread pool. Callers
/// write results by block index, so the outcome does not depend on the number
/// of threads. The first exception thrown by any block is rethrown.
template <typename Fn>
void parallel_blocks(std::size_t n_blocks, Fn&& fn) {
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  const std::size_t n_threads = std::min(hw, n_blocks);
  if (n_threads <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  workers.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    workers.emplace_back([&, t] {
      for (std::size_t b = t; b < n_blocks; b += n_threads) {
        try {
          fn(b);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

/// Element-wise parallel loop over [0, n) split into fixed-size blocks.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t block_size = 256) {
  const std::size_t n_blocks = (n + block_size - 1) / block_size;
  parallel_blocks(n_blocks, [&](std::size_t b) {
    const std::size_t lo = b * block_size;
    const std::size_t hi = std::min(n, lo + block_size);
    for (std::size_t i = lo; i < hi; ++i) fn(i);
  });
}

}  // namespace cttx
