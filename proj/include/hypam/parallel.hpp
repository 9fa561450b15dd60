#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hypam {

inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Splits [0, n) into fixed blocks of `block` items and evaluates
/// fn(begin, end) for each on a pool of workers. Results come back in block
/// order, so any reduction over them is independent of the worker count.
template <class Result, class Fn>
std::vector<Result> run_blocks(std::size_t n, std::size_t block, unsigned workers, Fn&& fn) {
  block = std::max<std::size_t>(block, 1);
  const std::size_t n_blocks = (n + block - 1) / block;
  std::vector<Result> out(n_blocks);
  if (n_blocks == 0) return out;

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= n_blocks) return;
      try {
        out[b] = fn(b * block, std::min(n, (b + 1) * block));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n_blocks);
        return;
      }
    }
  };

  const unsigned n_threads = std::min<unsigned>(resolve_workers(workers), static_cast<unsigned>(n_blocks));
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace hypam
