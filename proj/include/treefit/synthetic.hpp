#pragma once

// Seeded graph generators. Every generator is a pure function of its
// parameters; randomness comes from treefit::Rng only.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "treefit/error.hpp"
#include "treefit/graph.hpp"
#include "treefit/rng.hpp"

namespace treefit {

inline constexpr std::size_t kMaxConnectivityAttempts = 1000;

struct WeightRange {
  double lo = 1.0;
  double hi = 1.0;
};

// Random recursive tree: node i > 0 attaches to a uniform parent in [0, i).
inline Graph gen_tree(std::size_t n, std::uint64_t seed, WeightRange weights = {}) {
  if (n == 0) throw ConfigError("gen_tree: n must be at least 1");
  if (!(weights.lo > 0.0) || weights.hi < weights.lo) throw ConfigError("gen_tree: need 0 < lo <= hi");
  Rng rng(seed);
  Graph g(n);
  for (std::size_t i = 1; i < n; ++i) {
    const auto parent = static_cast<std::size_t>(rng.below(i));
    const double w = weights.lo == weights.hi ? weights.lo : rng.uniform(weights.lo, weights.hi);
    g.add_edge(parent, i, w);
  }
  return g;
}

inline Graph gen_cycle(std::size_t n) {
  if (n < 3) throw ConfigError("gen_cycle: n must be at least 3");
  Graph g(n);
  for (std::size_t i = 0; i < n; ++i) g.add_edge(i, (i + 1) % n);
  return g;
}

// Node (r, c) has index r * cols + c.
inline Graph gen_grid(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw ConfigError("gen_grid: dimensions must be positive");
  Graph g(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t id = r * cols + c;
      if (c + 1 < cols) g.add_edge(id, id + 1);
      if (r + 1 < rows) g.add_edge(id, id + cols);
    }
  }
  return g;
}

namespace detail {

// Samples pairs i < j in lexicographic order with probability prob(i, j),
// redrawing the whole graph until it is connected.
template <typename Prob>
Graph sample_connected(std::size_t n, Rng& rng, Prob&& prob, const char* who) {
  for (std::size_t attempt = 0; attempt < kMaxConnectivityAttempts; ++attempt) {
    Graph g(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.bernoulli(prob(i, j))) g.add_edge(i, j);
    if (is_connected(g)) return g;
  }
  throw ConnectivityError(std::string(who) + ": no connected sample within " +
                          std::to_string(kMaxConnectivityAttempts) + " attempts");
}

}  // namespace detail

// Connected G(n, p) by rejection resampling.
inline Graph gen_er(std::size_t n, double p, std::uint64_t seed) {
  if (n == 0) throw ConfigError("gen_er: n must be at least 1");
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("gen_er: p must be in (0, 1]");
  Rng rng(seed);
  return detail::sample_connected(n, rng, [p](std::size_t, std::size_t) { return p; }, "gen_er");
}

struct SbmSpec {
  std::vector<std::size_t> block_sizes;
  double p_in = 0.6;
  double p_out = 0.2;
  std::uint64_t seed = 0;
};

struct SbmGraph {
  Graph graph;
  std::vector<std::size_t> blocks;  // block id per node
};

// Blocks occupy contiguous index ranges in the order given.
inline SbmGraph gen_sbm(const SbmSpec& spec) {
  if (spec.block_sizes.empty()) throw ConfigError("gen_sbm: need at least one block");
  for (auto s : spec.block_sizes)
    if (s == 0) throw ConfigError("gen_sbm: block sizes must be positive");
  if (!(0.0 <= spec.p_out && spec.p_out <= spec.p_in && spec.p_in <= 1.0))
    throw ConfigError("gen_sbm: need 0 <= p_out <= p_in <= 1");
  std::vector<std::size_t> blocks;
  for (std::size_t b = 0; b < spec.block_sizes.size(); ++b) blocks.insert(blocks.end(), spec.block_sizes[b], b);
  Rng rng(spec.seed);
  auto prob = [&](std::size_t i, std::size_t j) { return blocks[i] == blocks[j] ? spec.p_in : spec.p_out; };
  return {detail::sample_connected(blocks.size(), rng, prob, "gen_sbm"), std::move(blocks)};
}

}  // namespace treefit
