#include "rankformer/threading.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace rankformer {

namespace {

int initial_thread_count() {
  if (const char* env = std::getenv("RANKFORMER_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int>& thread_cap() {
  static std::atomic<int> cap{initial_thread_count()};
  return cap;
}

}  // namespace

void set_num_threads(int n) { thread_cap().store(std::max(1, n)); }

int num_threads() { return thread_cap().load(); }

void parallel_for(Index begin, Index end, const std::function<void(Index, Index)>& body) {
  const Index total = end - begin;
  if (total <= 0) return;
  const int workers = static_cast<int>(std::min<Index>(num_threads(), total));
  if (workers <= 1 || total < 256) {
    body(begin, end);
    return;
  }
  const Index chunk = (total + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const Index lo = begin + w * chunk;
    const Index hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace rankformer
