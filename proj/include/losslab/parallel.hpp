#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace losslab {

/// Splits [0, n) into fixed-size blocks and evaluates `fn(begin, end)` for each
/// block on up to `workers` threads. Block boundaries depend only on `n` and
/// `block`, so an in-order reduction of the returned vector is bit-identical
/// for every worker count.
template <typename Fn>
auto map_blocks(std::size_t n, std::size_t block, std::size_t workers, Fn&& fn)
    -> std::vector<decltype(fn(std::size_t{}, std::size_t{}))> {
  using Result = decltype(fn(std::size_t{}, std::size_t{}));
  block = std::max<std::size_t>(block, 1);
  const std::size_t n_blocks = (n + block - 1) / block;
  std::vector<Result> out(n_blocks);
  if (n_blocks == 0) return out;

  workers = std::clamp<std::size_t>(workers, 1, n_blocks);
  auto run_block = [&](std::size_t b) {
    const std::size_t begin = b * block;
    out[b] = fn(begin, std::min(n, begin + block));
  };
  if (workers == 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) run_block(b);
    return out;
  }

  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      // Static round-robin assignment; results land in their own slot.
      for (std::size_t b = w; b < n_blocks; b += workers) {
        try {
          run_block(b);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

inline std::size_t default_workers() {
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace losslab
