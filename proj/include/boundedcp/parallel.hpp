#pragma once

#include <atomic>
#include <thread>
#include <utility>
#include <vector>

namespace boundedcp {

// Runs fn(0..count-1), optionally across threads. Work items must write
// only to their own slot of any shared output so results are identical for
// every thread count; scheduling is dynamic, output placement is not.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  if (count <= 0) return;
  threads = std::min(std::max(1, threads), count);
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace boundedcp
