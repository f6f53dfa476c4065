#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "treefit/error.hpp"
#include "treefit/matrix.hpp"
#include "treefit/parallel.hpp"

namespace treefit {

struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Weighted undirected simple graph. Labels, when present, hold the original
// node identifiers (one per node).
class Graph {
 public:
  Graph() = default;
  explicit Graph(std::size_t node_count) : node_count_(node_count) {}

  std::size_t node_count() const noexcept { return node_count_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  std::string label(std::size_t node) const {
    return labels_.empty() ? std::to_string(node) : labels_[node];
  }

  // Appends a node and returns its index.
  std::size_t add_node(std::string label = {}) {
    if (label.empty() && labels_.empty()) return node_count_++;
    if (labels_.empty())
      for (std::size_t i = 0; i < node_count_; ++i) labels_.push_back(std::to_string(i));
    labels_.push_back(label.empty() ? std::to_string(node_count_) : std::move(label));
    return node_count_++;
  }

  void set_labels(std::vector<std::string> labels) {
    if (!labels.empty() && labels.size() != node_count_)
      throw DimensionError("label count does not match node count");
    labels_ = std::move(labels);
  }

  void add_edge(std::size_t u, std::size_t v, double weight = 1.0) {
    if (u >= node_count_ || v >= node_count_) throw IndexError("edge endpoint out of range");
    if (u == v) throw ValueError("self-loop at node " + label(u));
    if (!(weight > 0.0) || !std::isfinite(weight))
      throw ValueError("nonpositive weight on edge " + label(u) + "-" + label(v));
    if (!pair_keys_.insert(pair_key(u, v)).second)
      throw ValueError("duplicate edge " + label(u) + "-" + label(v));
    edges_.push_back({u, v, weight});
  }

  bool has_edge(std::size_t u, std::size_t v) const { return pair_keys_.count(pair_key(u, v)) > 0; }

  bool unit_weights() const {
    return std::all_of(edges_.begin(), edges_.end(), [](const Edge& e) { return e.weight == 1.0; });
  }

  std::vector<std::vector<std::pair<std::size_t, double>>> adjacency() const {
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(node_count_);
    for (const auto& e : edges_) {
      adj[e.u].emplace_back(e.v, e.weight);
      adj[e.v].emplace_back(e.u, e.weight);
    }
    return adj;
  }

 private:
  static std::uint64_t pair_key(std::size_t u, std::size_t v) {
    if (u > v) std::swap(u, v);
    return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(v);
  }

  std::size_t node_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::string> labels_;
  std::unordered_set<std::uint64_t> pair_keys_;
};

// Component id per node; components numbered by their smallest node.
inline std::vector<std::size_t> connected_components(const Graph& g, std::size_t* count = nullptr) {
  const std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> comp(g.node_count(), none);
  const auto adj = g.adjacency();
  std::size_t next = 0;
  for (std::size_t s = 0; s < g.node_count(); ++s) {
    if (comp[s] != none) continue;
    std::vector<std::size_t> stack{s};
    comp[s] = next;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (const auto& [v, w] : adj[u]) {
        if (comp[v] == none) {
          comp[v] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  if (count) *count = next;
  return comp;
}

inline bool is_connected(const Graph& g) {
  std::size_t count = 0;
  connected_components(g, &count);
  return count <= 1;
}

// Induced subgraph on the largest component; ties go to the component with
// the smallest original index. Nodes keep their relative order and labels.
inline Graph largest_component(const Graph& g) {
  if (g.node_count() == 0) throw ValueError("largest_component: empty graph");
  std::size_t count = 0;
  const auto comp = connected_components(g, &count);
  std::vector<std::size_t> sizes(count, 0);
  for (auto c : comp) ++sizes[c];
  const auto best = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());

  const std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> remap(g.node_count(), none);
  std::vector<std::string> labels;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (comp[i] != best) continue;
    remap[i] = kept++;
    labels.push_back(g.label(i));
  }
  Graph out(kept);
  out.set_labels(std::move(labels));
  for (const auto& e : g.edges())
    if (comp[e.u] == best) out.add_edge(remap[e.u], remap[e.v], e.weight);
  return out;
}

enum class ShortestPathMethod { Auto, Bfs, Dijkstra };

namespace detail {

inline void bfs_row(const std::vector<std::vector<std::pair<std::size_t, double>>>& adj, std::size_t source,
                    std::vector<double>& dist) {
  std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
  std::vector<std::size_t> frontier{source}, next;
  dist[source] = 0.0;
  double layer = 0.0;
  while (!frontier.empty()) {
    layer += 1.0;
    next.clear();
    for (auto u : frontier)
      for (const auto& [v, w] : adj[u])
        if (std::isinf(dist[v])) {
          dist[v] = layer;
          next.push_back(v);
        }
    frontier.swap(next);
  }
}

inline void dijkstra_row(const std::vector<std::vector<std::pair<std::size_t, double>>>& adj, std::size_t source,
                         std::vector<double>& dist) {
  std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [du, u] = heap.top();
    heap.pop();
    if (du > dist[u]) continue;
    for (const auto& [v, w] : adj[u]) {
      const double cand = du + w;
      if (cand < dist[v]) {
        dist[v] = cand;
        heap.emplace(cand, v);
      }
    }
  }
}

}  // namespace detail

// Shortest-path metric of a connected graph. Auto picks layered BFS when
// every weight is 1 and Dijkstra otherwise.
inline DistanceMatrix all_pairs_shortest_paths(const Graph& g, ShortestPathMethod method = ShortestPathMethod::Auto) {
  const std::size_t n = g.node_count();
  if (method == ShortestPathMethod::Auto)
    method = g.unit_weights() ? ShortestPathMethod::Bfs : ShortestPathMethod::Dijkstra;
  if (method == ShortestPathMethod::Bfs && !g.unit_weights())
    throw ValueError("all_pairs_shortest_paths: BFS requires unit weights");
  const auto adj = g.adjacency();
  std::vector<std::vector<double>> rows(n, std::vector<double>(n));
  parallel_for(0, n, [&](std::size_t s) {
    if (method == ShortestPathMethod::Bfs)
      detail::bfs_row(adj, s, rows[s]);
    else
      detail::dijkstra_row(adj, s, rows[s]);
  });
  DistanceMatrix d(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::isinf(rows[i][j]))
        throw ConnectivityError("graph is disconnected: no path between " + g.label(i) + " and " + g.label(j));
      // Dijkstra from either end can round differently; keep the smaller.
      d.set(i, j, std::min(rows[i][j], rows[j][i]));
    }
  }
  return d;
}

// n x d real features, row-major.
class FeatureMatrix {
 public:
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    FeatureMatrix f(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != cols) throw DimensionError("feature row " + std::to_string(i) + " is ragged");
      std::copy(rows[i].begin(), rows[i].end(), f.data_.begin() + static_cast<std::ptrdiff_t>(i * cols));
    }
    return f;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
};

// 1 - cos(angle) between rows; may violate the triangle inequality.
inline DistanceMatrix cosine_dissimilarity(const FeatureMatrix& f) {
  const std::size_t n = f.rows();
  std::vector<double> norms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < f.cols(); ++k) s += f(i, k) * f(i, k);
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0) throw ValueError("cosine_dissimilarity: row " + std::to_string(i) + " has zero norm");
  }
  DistanceMatrix d(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < f.cols(); ++k) dot += f(i, k) * f(j, k);
      d.set(i, j, std::clamp(1.0 - dot / (norms[i] * norms[j]), 0.0, 2.0));
    }
  }
  return d;
}

}  // namespace treefit
