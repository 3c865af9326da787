#include "hycone/common.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>
#include <vector>

namespace hycone {

double Rng::uniform() {
  // 53 random bits -> [0, 1) with full double resolution.
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // Box-Muller; u1 shifted into (0, 1] so the log is finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  return r * std::cos(2.0 * M_PI * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw contract_violation("Rng::index: n must be >= 1");
  // Rejection sampling keeps the draw exactly uniform.
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull + (b << 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

int thread_cap() {
  static int cap = [] {
    const char* env = std::getenv("HYCONE_THREADS");
    if (env == nullptr) return 1;
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || v < 1) return 1;
    return static_cast<int>(v);
  }();
  return cap;
}

std::vector<std::size_t> histogram_counts(std::span<const double> values,
                                          std::span<const double> edges) {
  if (edges.size() < 2) throw contract_violation("histogram_counts: need >= 2 edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1]))
      throw contract_violation("histogram_counts: edges must be strictly increasing");
  std::vector<std::size_t> counts(edges.size() - 1, 0);
  for (double v : values) {
    if (v < edges.front() || v > edges.back()) continue;
    if (v == edges.back()) {
      ++counts.back();
      continue;
    }
    // Rightmost edge <= v.
    std::size_t lo = 0, hi = edges.size() - 1;
    while (hi - lo > 1) {
      std::size_t mid = (lo + hi) / 2;
      if (edges[mid] <= v)
        lo = mid;
      else
        hi = mid;
    }
    ++counts[lo];
  }
  return counts;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  int cap = thread_cap();
  if (cap <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cap), n);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace hycone
