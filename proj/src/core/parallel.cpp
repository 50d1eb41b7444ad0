// SPDX-License-Identifier: Apache-2.0
#include "avsr/core/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace avsr {

std::size_t thread_cap() {
  static const std::size_t cap = [] {
    const char* env = std::getenv("AVSR_THREADS");
    if (env == nullptr) return std::size_t{1};
    try {
      const long v = std::stol(env);
      return v < 1 ? std::size_t{1} : static_cast<std::size_t>(v);
    } catch (...) {
      return std::size_t{1};
    }
  }();
  return cap;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(thread_cap(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace avsr
