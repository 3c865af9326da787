#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hycone {

// Error hierarchy. The CLI maps these to exit codes: data_error -> 2,
// numeric_error -> 3, everything else -> 1.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct contract_violation : error {
  using error::error;
};
struct config_error : error {
  using error::error;
};
struct data_error : error {
  using error::error;
};
struct numeric_error : error {
  using error::error;
};
struct io_error : error {
  using error::error;
};

// Deterministic RNG. The engine (mt19937_64) is fully specified by the
// standard; the uniform/normal transforms are spelled out here instead of
// using std:: distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  double normal();                         // standard normal, Box-Muller
  std::size_t index(std::size_t n);        // uniform in [0, n), n >= 1

 private:
  std::mt19937_64 engine_;
};

// splitmix64-style mixer for deriving stream seeds from (seed, tag) pairs.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Runs fn(i) for i in [0, n). Honors the HYCONE_THREADS cap (default 1).
// Work items must write to disjoint locations; order of execution is
// unspecified but every index runs exactly once.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Thread cap read once from HYCONE_THREADS (>= 1; absent or invalid -> 1).
int thread_cap();

// Bin counts for strictly increasing edges (>= 2 of them): bin j covers
// [edges[j], edges[j+1]), except the last bin which also includes its right
// edge. Out-of-range values are dropped, not clipped.
std::vector<std::size_t> histogram_counts(std::span<const double> values,
                                          std::span<const double> edges);

}  // namespace hycone
