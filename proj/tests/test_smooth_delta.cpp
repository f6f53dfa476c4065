#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <numeric>

#include "test_support.hpp"
#include "treefit/metric.hpp"
#include "treefit/smooth_delta.hpp"

using namespace treefit;
using namespace treefit::testing;

TEST(Lse, Basics) {
  EXPECT_DOUBLE_EQ(lse({3.25}, 7.0), 3.25);
  EXPECT_DOUBLE_EQ(lse({3.25}, -7.0), 3.25);
  EXPECT_NEAR(lse({0.0, 0.0}, 1.0), std::log(2.0), 1e-15);
  EXPECT_THROW(lse(std::span<const double>{}, 1.0), ValueError);
  EXPECT_THROW(lse({1.0}, 0.0), ValueError);
}

TEST(Lse, SoftMaxAndSoftMinBounds) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(10);
    for (auto& x : v) x = rng.uniform(-5.0, 5.0);
    const double hi = *std::max_element(v.begin(), v.end());
    const double lo = *std::min_element(v.begin(), v.end());
    const double slack = std::log(10.0) / 50.0;
    const double smax = lse(v, 50.0), smin = lse(v, -50.0);
    EXPECT_GE(smax, hi);
    EXPECT_LE(smax, hi + slack);
    EXPECT_LE(smin, lo);
    EXPECT_GE(smin, lo - slack);
  }
}

TEST(Lse, TranslationAndOverflowSafety) {
  const std::vector<double> v{0.3, -1.2, 2.5, 0.0};
  for (double c : {-100.0, 3.5, 1e3}) {
    std::vector<double> shifted(v);
    for (auto& x : shifted) x += c;
    EXPECT_NEAR(lse(shifted, 4.0), lse(v, 4.0) + c, 1e-12 * (1 + std::abs(c)));
  }
  EXPECT_TRUE(std::isfinite(lse({1e3, 999.0}, 1e6)));
}

TEST(DeltaSmooth, SinglePoint) {
  for (double lambda : {0.5, 10.0, 1000.0})
    EXPECT_NEAR(delta_smooth(DistanceMatrix(1), {lambda}), -std::log(2.0) / lambda, 1e-15);
}

TEST(DeltaSmooth, FourCycleSandwich) {
  const double v = delta_smooth(cycle_metric(4), {100.0});
  EXPECT_GE(v, 1.0 - std::log(2.0) / 100.0);
  EXPECT_LE(v, 1.0 + 4.0 * std::log(4.0) / 100.0);
}

TEST(DeltaSmooth, TreeSandwich) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const std::size_t n = 10 + 2 * seed;
    const double v = delta_smooth(random_tree_metric(n, seed), {1000.0});
    EXPECT_GE(v, -std::log(2.0) / 1000.0 - 1e-12);
    EXPECT_LE(v, 4.0 * std::log(static_cast<double>(n)) / 1000.0);
  }
}

TEST(DeltaSmooth, MatchesNaiveSum) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto d = random_euclidean_metric(6, seed);
    const std::vector<std::size_t> all{0, 1, 2, 3, 4, 5};
    for (double lambda : {0.5, 2.0, 10.0}) EXPECT_NEAR(delta_smooth(d, {lambda}), delta_smooth_naive(d, lambda, all), 1e-12);
    const std::vector<std::size_t> sub{4, 1, 3};
    EXPECT_NEAR(delta_smooth(d, {3.0}, sub), delta_smooth_naive(d, 3.0, sub), 1e-12);
  }
}

TEST(DeltaSmooth, ConvergesToExactAsLambdaGrows) {
  const auto d = random_euclidean_metric(8, 33);
  const double exact = delta_exact(d);
  double previous = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 4; ++k) {
    const double lambda = std::pow(10.0, k);
    const double err = std::abs(delta_smooth(d, {lambda}) - exact);
    EXPECT_LE(err, std::max(std::log(2.0), 4 * std::log(8.0)) / lambda);
    if (k >= 2) {
      EXPECT_LT(err, previous);
    }
    previous = err;
  }
}

TEST(DeltaSmooth, LargeLambdaStaysFinite) {
  DistanceMatrix d = random_euclidean_metric(6, 2);
  DistanceMatrix big(6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j) big.set(i, j, 250.0 * d(i, j));
  const double v = delta_smooth(big, {1e6});
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, delta_exact(big), 4 * std::log(6.0) / 1e6 + 1e-9);
}

TEST(DeltaSmooth, Errors) {
  const auto d = cycle_metric(4);
  EXPECT_THROW(delta_smooth(d, {0.0}), ConfigError);
  const std::vector<std::size_t> empty;
  EXPECT_THROW(delta_smooth(d, {1.0}, empty), ValueError);
  const std::vector<std::size_t> bad{0, 9};
  EXPECT_THROW(delta_smooth(d, {1.0}, bad), IndexError);
}

TEST(SampleBatches, Contract) {
  const auto full = sample_batches(9, 1, 9, 4);
  auto sorted = full.batches[0];
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> expect(9);
  std::iota(expect.begin(), expect.end(), std::size_t{0});
  EXPECT_EQ(sorted, expect);
  EXPECT_THROW(sample_batches(9, 1, 10, 4), ConfigError);
  EXPECT_THROW(sample_batches(9, 1, 3, 4), ConfigError);
  EXPECT_THROW(sample_batches(9, 0, 5, 4), ConfigError);
  EXPECT_EQ(sample_batches(100, 5, 8, 77), sample_batches(100, 5, 8, 77));
  EXPECT_NE(sample_batches(100, 5, 8, 77), sample_batches(100, 5, 8, 78));
  sample_batches(100, 5, 8, 77).validate(100);
}

TEST(BatchSet, Validation) {
  EXPECT_THROW(BatchSet{}.validate(10), ConfigError);
  EXPECT_THROW((BatchSet{{{0, 1, 2, 2}}}.validate(10)), ConfigError);
  EXPECT_THROW((BatchSet{{{0, 1, 2, 10}}}.validate(10)), IndexError);
  EXPECT_THROW((BatchSet{{{0, 1, 2}}}.validate(10)), ConfigError);
}

TEST(DeltaBatched, Compositions) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const std::size_t n = 5 + seed % 5;
    const auto d = random_graph_metric(n, seed);
    const SmoothingParams p{7.0};
    const auto one = sample_batches(n, 1, n, seed);
    EXPECT_NEAR(delta_batched(d, p, one), delta_smooth(d, p), 1e-12);
    const auto partial = sample_batches(n, 1, 4, seed + 100);
    EXPECT_EQ(delta_batched(d, p, partial), delta_smooth(d, p, partial.batches[0]));
    BatchSet repeated;
    for (int k = 0; k < 6; ++k) repeated.batches.push_back(partial.batches[0]);
    EXPECT_NEAR(delta_batched(d, p, repeated), delta_smooth(d, p, partial.batches[0]) + std::log(6.0) / 7.0, 1e-12);
  }
}

TEST(GradDeltaBatched, MatchesFiniteDifferences) {
  const double h = 1e-5;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = random_euclidean_metric(6, 1000 + seed);
    const SmoothingParams p{5.0};
    const auto batches = sample_batches(6, 2, 5, seed);
    const auto g = grad_delta_batched(d, p, batches);
    auto f = [&](const DistanceMatrix& m) { return delta_batched(m, p, batches); };
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = i + 1; j < 6; ++j) {
        if (std::abs(g(i, j)) <= 1e-8) continue;
        const double fd = central_difference(f, d, i, j, h);
        EXPECT_LT(std::abs(g(i, j) - fd) / std::abs(g(i, j)), 1e-4)
            << "seed " << seed << " pair " << i << "," << j << " analytic " << g(i, j) << " fd " << fd;
      }
  }
}

TEST(GradDeltaBatched, StructureAndSupport) {
  const auto d = random_euclidean_metric(9, 6);
  const BatchSet batches{{{0, 2, 4, 6}, {2, 4, 6, 8}}};
  const auto g = grad_delta_batched(d, {3.0}, batches);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(g(i, i), 0.0);
    for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(g(i, j), g(j, i));
  }
  // 1 and 3 appear in no batch
  for (std::size_t j = 0; j < 9; ++j) {
    EXPECT_EQ(g(1, j), 0.0);
    EXPECT_EQ(g(3, j), 0.0);
  }
  EXPECT_EQ(g(0, 8), 0.0);  // 0 and 8 never share a batch
  EXPECT_NE(g(0, 2), 0.0);
}

TEST(GradDeltaBatched, IndependentOfChunksAndThreads) {
  const auto d = random_euclidean_metric(20, 8);
  const auto batches = sample_batches(20, 7, 6, 3);
  const SmoothingParams p{10.0};
  setenv("TREEFIT_THREADS", "1", 1);
  const auto base = evaluate_delta_batched(d, p, batches, true, 1);
  const auto chunked = evaluate_delta_batched(d, p, batches, true, 3);
  setenv("TREEFIT_THREADS", "4", 1);
  const auto threaded = evaluate_delta_batched(d, p, batches, true, 2);
  unsetenv("TREEFIT_THREADS");
  EXPECT_EQ(base.value, chunked.value);
  EXPECT_EQ(base.value, threaded.value);
  EXPECT_EQ(base.gradient, chunked.gradient);
  EXPECT_EQ(base.gradient, threaded.gradient);
}
