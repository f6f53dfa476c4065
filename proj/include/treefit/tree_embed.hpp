#pragma once

// Gromov's tree embedding through single-linkage clustering, and explicit
// tree reconstruction.
//
// With m = max_x d(x, w) and d_G(x, y) = m - (x|y)_w off the diagonal, the
// single-linkage (minimax path) ultrametric u of d_G gives the tree Gromov
// products (x|y)'_w = m - u(x, y), hence the tree metric
//
//   d_T(x, y) = d(x, w) + d(y, w) - 2 (m - u(x, y)),   d_T(x, x) = 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "treefit/error.hpp"
#include "treefit/format.hpp"
#include "treefit/matrix.hpp"

namespace treefit {

inline DenseMatrix root_gromov_matrix(const DistanceMatrix& d, std::size_t w) {
  d.check_index(w);
  const std::size_t n = d.size();
  DenseMatrix g(n);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y) g(x, y) = 0.5 * (d(x, w) + d(y, w) - d(x, y));
  return g;
}

struct MstEdge {
  std::size_t u, v;
  double weight;
};

struct MinimaxResult {
  DistanceMatrix ultrametric;
  std::vector<MstEdge> mst;  // in Prim insertion order
};

namespace detail {

// Prim's algorithm on the complete graph, O(n^2). When v joins through
// parent p with edge e, every earlier node u gets u(u, v) = max(u(u, p), e).
inline MinimaxResult minimax_closure(const DistanceMatrix& m) {
  const std::size_t n = m.size();
  MinimaxResult out{DistanceMatrix(n), {}};
  if (n == 0) return out;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> key(n, inf);
  std::vector<std::size_t> parent(n, 0);
  std::vector<char> in_tree(n, 0);
  std::vector<std::size_t> order;
  order.reserve(n);
  in_tree[0] = 1;
  order.push_back(0);
  for (std::size_t v = 1; v < n; ++v) key[v] = m(0, v);
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t best = n;
    for (std::size_t v = 0; v < n; ++v)
      if (!in_tree[v] && (best == n || key[v] < key[best])) best = v;
    const std::size_t p = parent[best];
    const double e = key[best];
    for (auto u : order) out.ultrametric.set(u, best, u == p ? e : std::max(out.ultrametric(u, p), e));
    out.mst.push_back({p, best, e});
    in_tree[best] = 1;
    order.push_back(best);
    for (std::size_t v = 0; v < n; ++v)
      if (!in_tree[v] && m(best, v) < key[v]) {
        key[v] = m(best, v);
        parent[v] = best;
      }
  }
  return out;
}

}  // namespace detail

// Minimax path distance: the smallest possible largest hop over all paths.
inline DistanceMatrix slhc_ultrametric(const DistanceMatrix& m) { return detail::minimax_closure(m).ultrametric; }

struct Merge {
  std::size_t left, right;  // cluster ids: points 0..n-1, merge k creates n + k
  double height;
};

struct Dendrogram {
  std::size_t leaf_count = 0;
  std::vector<Merge> merges;
};

// Single-linkage merges in non-decreasing height order (ties keep MST order).
inline Dendrogram single_linkage_dendrogram(const DistanceMatrix& m) {
  auto mst = detail::minimax_closure(m).mst;
  std::stable_sort(mst.begin(), mst.end(), [](const MstEdge& a, const MstEdge& b) { return a.weight < b.weight; });
  const std::size_t n = m.size();
  std::vector<std::size_t> uf(n), cluster(n);
  std::iota(uf.begin(), uf.end(), std::size_t{0});
  std::iota(cluster.begin(), cluster.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (uf[x] != x) x = uf[x] = uf[uf[x]];
    return x;
  };
  Dendrogram dendro{n, {}};
  for (const auto& e : mst) {
    const std::size_t a = find(e.u), b = find(e.v);
    dendro.merges.push_back({cluster[a], cluster[b], e.weight});
    uf[b] = a;
    cluster[a] = n + dendro.merges.size() - 1;
  }
  return dendro;
}

inline DistanceMatrix gromov_tree_metric(const DistanceMatrix& d, std::size_t w) {
  d.check_index(w);
  const std::size_t n = d.size();
  double m = 0.0;
  for (std::size_t x = 0; x < n; ++x) m = std::max(m, d(x, w));
  DistanceMatrix dg(n);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = x + 1; y < n; ++y) dg.set(x, y, m - 0.5 * (d(x, w) + d(y, w) - d(x, y)));
  const auto u = slhc_ultrametric(dg);
  DistanceMatrix dt(n);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = x + 1; y < n; ++y) dt.set(x, y, d(x, w) + d(y, w) - 2.0 * (m - u(x, y)));
  return dt;
}

struct TreeEdge {
  std::size_t parent, child;
  double weight;
};

// Nodes 0..point_count-1 are the input points; the rest are Steiner nodes.
struct TreeStructure {
  std::size_t point_count = 0;
  std::size_t node_count = 0;
  std::size_t root = 0;
  std::vector<TreeEdge> edges;  // parents listed before their children

  bool is_point(std::size_t node) const noexcept { return node < point_count; }

  // "p<k>" for points, "s<k>" for Steiner nodes.
  std::string node_id(std::size_t node) const {
    return is_point(node) ? "p" + std::to_string(node) : "s" + std::to_string(node - point_count);
  }
};

namespace detail {

inline std::vector<std::vector<std::pair<std::size_t, double>>> checked_children(const TreeStructure& t) {
  if (t.node_count < t.point_count || t.root >= t.node_count) throw ValueError("malformed tree: bad node counts");
  if (t.node_count > 0 && t.edges.size() != t.node_count - 1) throw ValueError("malformed tree: edge count");
  std::vector<std::vector<std::pair<std::size_t, double>>> children(t.node_count);
  std::vector<char> has_parent(t.node_count, 0);
  for (const auto& e : t.edges) {
    if (e.parent >= t.node_count || e.child >= t.node_count || e.parent == e.child)
      throw ValueError("malformed tree: bad edge endpoint");
    if (!(e.weight >= 0.0)) throw ValueError("malformed tree: negative edge weight");
    if (has_parent[e.child] || e.child == t.root) throw ValueError("malformed tree: node with two parents");
    has_parent[e.child] = 1;
    children[e.parent].emplace_back(e.child, e.weight);
  }
  // reachability from the root rules out cycles given n-1 edges
  std::vector<char> seen(t.node_count, 0);
  std::vector<std::size_t> stack{t.root};
  seen[t.root] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (const auto& [c, w] : children[u])
      if (!seen[c]) {
        seen[c] = 1;
        ++reached;
        stack.push_back(c);
      }
  }
  if (reached != t.node_count) throw ValueError("malformed tree: not connected");
  return children;
}

}  // namespace detail

// Path lengths between the input points of a tree.
inline DistanceMatrix tree_metric_of(const TreeStructure& t) {
  const auto children = detail::checked_children(t);
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(t.node_count);
  for (std::size_t u = 0; u < t.node_count; ++u)
    for (const auto& [c, w] : children[u]) {
      adj[u].emplace_back(c, w);
      adj[c].emplace_back(u, w);
    }
  const std::size_t n = t.point_count;
  DistanceMatrix d(n);
  std::vector<double> dist(t.node_count);
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), -1.0);
    dist[s] = 0.0;
    stack.assign(1, s);
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (const auto& [v, w] : adj[u])
        if (dist[v] < 0.0) {
          dist[v] = dist[u] + w;
          stack.push_back(v);
        }
    }
    for (std::size_t x = s + 1; x < n; ++x) d.set(s, x, dist[x]);
  }
  return d;
}

// Builds the rooted tree realizing a Gromov tree metric with root w.
// Points sit at depth d_T(x, w); the branch point of x and y sits at depth
// (x|y)'_w. Internal nodes come from single-linkage merges of the non-root
// points; branch points that coincide with a point or with another branch
// point are merged into it, so no zero-length Steiner branches remain.
// Throws RealizationError when the result does not reproduce d_T.
inline TreeStructure reconstruct_tree(const DistanceMatrix& dt, std::size_t w) {
  dt.check_index(w);
  const std::size_t n = dt.size();
  TreeStructure tree;
  tree.point_count = n;
  tree.root = w;
  if (n == 1) {
    tree.node_count = 1;
    return tree;
  }

  std::vector<double> depth_of(n);
  double scale = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    depth_of[x] = dt(x, w);
    scale = std::max(scale, depth_of[x]);
  }
  const double eps = 1e-12 * std::max(1.0, scale);

  std::vector<std::size_t> others;
  for (std::size_t x = 0; x < n; ++x)
    if (x != w) others.push_back(x);
  const std::size_t k = others.size();
  DistanceMatrix dg(k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      const std::size_t x = others[a], y = others[b];
      dg.set(a, b, scale - 0.5 * (depth_of[x] + depth_of[y] - dt(x, y)));
    }
  const auto dendro = single_linkage_dendrogram(dg);

  // Mutable forest: children lists and node depths. Node ids follow
  // TreeStructure numbering; new Steiner nodes are appended.
  std::vector<std::vector<std::pair<std::size_t, double>>> children(n);
  std::vector<double> node_depth(depth_of);
  auto new_steiner = [&](double depth) {
    children.emplace_back();
    node_depth.push_back(depth);
    return children.size() - 1;
  };
  auto attach = [&](std::size_t parent, std::size_t child) {
    children[parent].emplace_back(child, std::max(0.0, node_depth[child] - node_depth[parent]));
  };
  auto absorb = [&](std::size_t into, std::size_t steiner) {
    for (auto& c : children[steiner]) children[into].push_back(c);
    children[steiner].clear();
  };

  // cluster id -> top node
  std::vector<std::size_t> top(k + dendro.merges.size());
  for (std::size_t a = 0; a < k; ++a) top[a] = others[a];
  for (std::size_t i = 0; i < dendro.merges.size(); ++i) {
    const auto& mg = dendro.merges[i];
    std::size_t na = top[mg.left], nb = top[mg.right];
    const double level = scale - mg.height;
    const bool a_at = node_depth[na] - level <= eps;
    const bool b_at = node_depth[nb] - level <= eps;
    std::size_t merged;
    if (a_at || b_at) {
      // Keep a point as the merge node when one is available.
      if (!a_at || (b_at && nb < n && na >= n)) std::swap(na, nb);
      merged = na;
      if (nb >= n && node_depth[nb] - level <= eps)
        absorb(merged, nb);
      else
        attach(merged, nb);
    } else {
      merged = new_steiner(level);
      attach(merged, na);
      attach(merged, nb);
    }
    top[k + i] = merged;
  }
  const std::size_t crown = top.back();
  if (crown >= n && node_depth[crown] <= eps) {
    absorb(w, crown);
  } else {
    node_depth[w] = 0.0;
    attach(w, crown);
  }

  // Breadth-first renumbering of the surviving Steiner nodes.
  std::vector<std::size_t> new_id(children.size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t x = 0; x < n; ++x) new_id[x] = x;
  std::size_t next = n;
  std::vector<std::size_t> queue{w};
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const auto u = queue[head];
    for (const auto& [c, wgt] : children[u]) {
      if (c >= n) new_id[c] = next++;
      tree.edges.push_back({new_id[u], new_id[c], wgt});
      queue.push_back(c);
    }
  }
  tree.node_count = next;

  const auto check = tree_metric_of(tree);
  double gap = 0.0;
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = x + 1; y < n; ++y) gap = std::max(gap, std::abs(check(x, y) - dt(x, y)));
  if (gap > 1e-6 * std::max(1.0, scale))
    throw RealizationError("matrix is not a rooted tree metric for root " + std::to_string(w) +
                           " (reconstruction gap " + format_double(gap) + ")");
  return tree;
}

namespace detail {

inline std::string newick_label(const std::string& label) {
  if (label.find_first_of(" \t()[]':;,") == std::string::npos && !label.empty()) return label;
  std::string quoted = "'";
  for (char c : label) {
    if (c == '\'') quoted += '\'';
    quoted += c;
  }
  return quoted + "'";
}

}  // namespace detail

// Rooted Newick with the root point as the outermost node. Points carry
// their labels (default "p<k>"), Steiner nodes are unlabeled, branch lengths
// use 6 significant digits. Children are ordered by the smallest point in
// their subtree.
inline std::string to_newick(const TreeStructure& t, const std::vector<std::string>& labels = {}) {
  const auto children = detail::checked_children(t);
  if (!labels.empty() && labels.size() != t.point_count) throw DimensionError("to_newick: label count mismatch");
  std::vector<std::size_t> min_point(t.node_count, std::numeric_limits<std::size_t>::max());
  // edges list parents before children, so a reverse sweep sees subtrees first
  for (std::size_t x = 0; x < t.point_count; ++x) min_point[x] = x;
  for (auto it = t.edges.rbegin(); it != t.edges.rend(); ++it)
    min_point[it->parent] = std::min(min_point[it->parent], min_point[it->child]);

  auto label_of = [&](std::size_t node) {
    if (!t.is_point(node)) return std::string();
    return detail::newick_label(labels.empty() ? "p" + std::to_string(node) : labels[node]);
  };
  std::string out;
  auto emit = [&](auto&& self, std::size_t node) -> void {
    auto kids = children[node];
    std::sort(kids.begin(), kids.end(),
              [&](const auto& a, const auto& b) { return min_point[a.first] < min_point[b.first]; });
    if (!kids.empty()) {
      out += '(';
      for (std::size_t i = 0; i < kids.size(); ++i) {
        if (i) out += ',';
        self(self, kids[i].first);
        out += ':';
        out += format_significant(kids[i].second, 6);
      }
      out += ')';
    }
    out += label_of(node);
  };
  emit(emit, t.root);
  out += ';';
  return out;
}

// "parent<TAB>child<TAB>weight" per edge.
inline std::string to_edge_tsv(const TreeStructure& t) {
  std::string out;
  for (const auto& e : t.edges)
    out += t.node_id(e.parent) + '\t' + t.node_id(e.child) + '\t' + format_double(e.weight) + '\n';
  return out;
}

}  // namespace treefit
