#include "fasc/instrument.hpp"

#include <atomic>

namespace fasc::instrument {

namespace {
std::atomic<int> g_max_cov_dim{0};
}

void note_cov_dim(int d) {
  int cur = g_max_cov_dim.load(std::memory_order_relaxed);
  while (d > cur &&
         !g_max_cov_dim.compare_exchange_weak(cur, d, std::memory_order_relaxed)) {
  }
}

int max_cov_dim() { return g_max_cov_dim.load(std::memory_order_relaxed); }

void reset() { g_max_cov_dim.store(0, std::memory_order_relaxed); }

}  // namespace fasc::instrument
