#include "doctest.h"

#include <array>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "hycone/common.hpp"

using namespace hycone;

TEST_CASE("rng is deterministic per seed") {
  Rng a(123), b(123), c(124);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    double x = a.uniform(), y = b.uniform(), z = c.uniform();
    all_equal = all_equal && (x == y);
    any_diff = any_diff || (x != z);
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform stays in range") {
  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    double v = r.uniform(-2.0, 3.0);
    CHECK(v >= -2.0);
    CHECK(v < 3.0);
  }
}

TEST_CASE("normal moments") {
  Rng r(99);
  const int n = 100000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    sum += x;
    sum2 += x * x;
  }
  double mean = sum / n;
  double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("index bounds and degenerate case") {
  Rng r(5);
  for (int i = 0; i < 1000; ++i) CHECK(r.index(7) < 7);
  for (int i = 0; i < 10; ++i) CHECK(r.index(1) == 0);
}

TEST_CASE("index covers all buckets") {
  Rng r(11);
  std::array<int, 5> hits{};
  for (int i = 0; i < 5000; ++i) hits[r.index(5)]++;
  for (int h : hits) CHECK(h > 700);
}

TEST_CASE("mix_seed separates streams") {
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
  CHECK(mix_seed(1, 2) != mix_seed(1, 3));
  CHECK(mix_seed(1, 2) != mix_seed(2, 2));
  CHECK(mix_seed(0, 0) != 0);
}

TEST_CASE("histogram bins are left-closed with a closed last bin") {
  std::vector<double> edges = {0.0, 2.0, 4.0};

  auto counts = histogram_counts(std::vector<double>{1.0, 3.0}, edges);
  CHECK(counts == std::vector<std::size_t>{1, 1});

  // Right edge of the final bin is included; beyond it is dropped.
  counts = histogram_counts(std::vector<double>{4.0, 4.5, -0.1}, edges);
  CHECK(counts == std::vector<std::size_t>{0, 1});

  // Interior edges belong to the bin on their right.
  counts = histogram_counts(std::vector<double>{2.0}, edges);
  CHECK(counts == std::vector<std::size_t>{0, 1});
}

TEST_CASE("histogram handles ratio-style edges") {
  std::vector<double> edges = {0.0, 0.5, 1.0};
  auto counts = histogram_counts(std::vector<double>{0.1, 0.9}, edges);
  CHECK(counts == std::vector<std::size_t>{1, 1});

  std::vector<double> ones(5, 1.0);
  counts = histogram_counts(ones, edges);
  CHECK(counts == std::vector<std::size_t>{0, 5});
}

TEST_CASE("histogram rejects bad edges") {
  CHECK_THROWS_AS(histogram_counts(std::vector<double>{1.0}, std::vector<double>{0.0}),
                  contract_violation);
  CHECK_THROWS_AS(
      histogram_counts(std::vector<double>{1.0}, std::vector<double>{0.0, 0.0, 1.0}),
      contract_violation);
  CHECK_THROWS_AS(
      histogram_counts(std::vector<double>{1.0}, std::vector<double>{1.0, 0.5}),
      contract_violation);
}

TEST_CASE("parallel_for runs every index once") {
  std::vector<int> hits(257, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
  for (int h : hits) CHECK(h == 1);
  parallel_for(0, [&](std::size_t) { CHECK(false); });
}

TEST_CASE("thread cap is at least one") { CHECK(thread_cap() >= 1); }
