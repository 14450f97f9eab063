#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace lithofield {

/// Splits [0, count) into at most `threads` contiguous chunks and runs
/// fn(chunk_index, begin, end) on each. Chunk boundaries depend only on
/// (count, threads), so per-chunk partial results combined in chunk order give
/// bit-stable reductions at a fixed thread count.
inline std::size_t chunk_count(std::size_t count, std::size_t threads) {
  return std::max<std::size_t>(1, std::min(count, std::max<std::size_t>(1, threads)));
}

template <class Fn>
void parallel_chunks(std::size_t count, std::size_t threads, Fn&& fn) {
  const std::size_t chunks = chunk_count(count, threads);
  auto bounds = [&](std::size_t k) { return count * k / chunks; };
  if (chunks == 1) {
    fn(std::size_t{0}, std::size_t{0}, count);
    return;
  }
  std::vector<std::exception_ptr> errors(chunks);
  {
    std::vector<std::jthread> pool;
    pool.reserve(chunks - 1);
    for (std::size_t k = 1; k < chunks; ++k) {
      pool.emplace_back([&, k] {
        try {
          fn(k, bounds(k), bounds(k + 1));
        } catch (...) {
          errors[k] = std::current_exception();
        }
      });
    }
    try {
      fn(std::size_t{0}, bounds(0), bounds(1));
    } catch (...) {
      errors[0] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace lithofield
