#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace ligs {

// Process-wide worker count. 0 means "decide from hardware". The CLI sets
// this once at startup from --threads or LIGS_THREADS; tests may override.
inline int& thread_count_override() {
  static int n = 0;
  return n;
}

inline int effective_thread_count() {
  int n = thread_count_override();
  if (n > 0) return n;
  if (const char* env = std::getenv("LIGS_THREADS")) {
    int e = std::atoi(env);
    if (e > 0) return e;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(begin, end) over disjoint contiguous chunks of [0, n). Chunk
// boundaries depend only on n and the chunk size, never on the thread count,
// so any per-chunk output can be reduced in index order afterwards for
// results that do not vary with parallelism.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t chunk, Fn&& fn) {
  if (n == 0) return;
  if (chunk == 0) chunk = 1;
  const std::size_t num_chunks = (n + chunk - 1) / chunk;
  const int threads = std::min<int>(effective_thread_count(),
                                    static_cast<int>(num_chunks));
  if (threads <= 1) {
    for (std::size_t c = 0; c < num_chunks; ++c)
      fn(c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= num_chunks) break;
      fn(c * chunk, std::min(n, (c + 1) * chunk));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (int i = 0; i + 1 < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

// Convenience element-wise form.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t chunk = std::max<std::size_t>(1, n / 64);
  parallel_chunks(n, chunk, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) fn(i);
  });
}

}  // namespace ligs
