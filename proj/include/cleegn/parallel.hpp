#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace cleegn {

// Number of worker threads. Override with CLEEGN_THREADS=n.
inline unsigned max_threads() {
  static const unsigned n = [] {
    if (const char* env = std::getenv("CLEEGN_THREADS")) {
      long v = std::atol(env);
      if (v >= 1) return static_cast<unsigned>(std::min(v, 256L));
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
  }();
  return n;
}

// Runs fn(begin, end) over a contiguous partition of [0, n).
// Ranges never overlap; results must not depend on which thread runs a range.
// Work smaller than `grain` items stays on the calling thread.
template <typename F>
void parallel_for(int64_t n, F&& fn, int64_t grain = 1) {
  if (n <= 0) return;
  int64_t want = grain > 0 ? (n + grain - 1) / grain : n;
  int64_t nt = std::min<int64_t>(max_threads(), std::min<int64_t>(want, n));
  if (nt <= 1) {
    fn(int64_t(0), n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(nt - 1));
  for (int64_t t = 1; t < nt; ++t) {
    int64_t b = n * t / nt;
    int64_t e = n * (t + 1) / nt;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(int64_t(0), n / nt);
  for (auto& th : pool) th.join();
}

// Fixed number of reduction chunks. Chunk boundaries depend only on n and
// kReduceChunks, never on the thread count, so chunked accumulations reduce
// in the same order on every machine.
inline constexpr int64_t kReduceChunks = 8;

inline std::pair<int64_t, int64_t> chunk_range(int64_t n, int64_t chunk) {
  return {n * chunk / kReduceChunks, n * (chunk + 1) / kReduceChunks};
}

// Runs fn(chunk_id) for chunk_id in [0, kReduceChunks), possibly in parallel.
template <typename F>
void run_chunks(F&& fn, bool serial = false) {
  if (serial || max_threads() <= 1) {
    for (int64_t c = 0; c < kReduceChunks; ++c) fn(c);
    return;
  }
  int64_t nt = std::min<int64_t>(max_threads(), kReduceChunks);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(nt - 1));
  for (int64_t t = 1; t < nt; ++t) {
    pool.emplace_back([&fn, t, nt] {
      for (int64_t c = t; c < kReduceChunks; c += nt) fn(c);
    });
  }
  for (int64_t c = 0; c < kReduceChunks; c += nt) fn(c);
  for (auto& th : pool) th.join();
}

}  // namespace cleegn
