#pragma once

// Smoothed Gromov hyperbolicity.
//
// For a point subset S the smoothed delta is
//
//   delta_S = LSE_lambda over (x,y,z,w) in S^4 of
//             LSE_{-lambda}((x|y)_w, (y|z)_w) - (x|z)_w
//
// with ordered quadruples and repeated indices included, and the batched
// estimate is LSE_lambda of delta_S over K sampled subsets. Both levels, and
// the inner soft-min, subtract their extremum before exponentiating.
//
// The gradient is taken with respect to unordered pair variables d_uv = d_vu
// and is assembled from three softmax layers: batch weights, quadruple
// weights inside a batch, and the two-way soft-min weight alpha.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treefit/error.hpp"
#include "treefit/matrix.hpp"
#include "treefit/parallel.hpp"
#include "treefit/rng.hpp"

namespace treefit {

struct SmoothingParams {
  double lambda = 10.0;

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be a positive finite number");
  }
};

// (1/lambda) log sum exp(lambda x_i). Negative lambda gives the soft-min.
inline double lse(std::span<const double> values, double lambda) {
  if (values.empty()) throw ValueError("lse: empty input");
  if (lambda == 0.0 || !std::isfinite(lambda)) throw ValueError("lse: lambda must be finite and nonzero");
  const double pivot = lambda > 0.0 ? *std::max_element(values.begin(), values.end())
                                    : *std::min_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += std::exp(lambda * (v - pivot));
  return pivot + std::log(sum) / lambda;
}

inline double lse(std::initializer_list<double> values, double lambda) {
  return lse(std::span<const double>(values.begin(), values.size()), lambda);
}

struct BatchSet {
  std::vector<std::vector<std::size_t>> batches;

  std::size_t size() const noexcept { return batches.size(); }
  bool empty() const noexcept { return batches.empty(); }

  friend bool operator==(const BatchSet&, const BatchSet&) = default;

  // Each batch: at least 4 pairwise-distinct indices in [0, n).
  void validate(std::size_t n) const {
    if (batches.empty()) throw ConfigError("batch set is empty");
    std::vector<char> seen(n, 0);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      if (batch.size() < 4 || batch.size() > n)
        throw ConfigError("batch " + std::to_string(b) + " has size " + std::to_string(batch.size()) +
                          ", need 4 <= m <= n=" + std::to_string(n));
      for (auto i : batch) {
        if (i >= n) throw IndexError("batch " + std::to_string(b) + " index out of range");
        if (seen[i]) throw ConfigError("batch " + std::to_string(b) + " repeats index " + std::to_string(i));
        seen[i] = 1;
      }
      for (auto i : batch) seen[i] = 0;
    }
  }
};

// Draws K subsets of m distinct indices from a caller-owned stream.
inline BatchSet sample_batches(std::size_t n, std::size_t k, std::size_t m, Rng& rng) {
  if (k < 1) throw ConfigError("sample_batches: K must be at least 1");
  if (m < 4) throw ConfigError("sample_batches: m must be at least 4");
  if (m > n) throw ConfigError("sample_batches: m=" + std::to_string(m) + " exceeds n=" + std::to_string(n));
  BatchSet set;
  set.batches.reserve(k);
  for (std::size_t b = 0; b < k; ++b) set.batches.push_back(rng.sample_without_replacement(n, m));
  return set;
}

inline BatchSet sample_batches(std::size_t n, std::size_t k, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  return sample_batches(n, k, m, rng);
}

namespace detail {

// Soft-min of two values and the weight d softmin / d a.
struct SoftMin2 {
  double value;
  double weight_a;
};

inline SoftMin2 soft_min2(double a, double b, double lambda) {
  const double lo = std::min(a, b);
  const double gap = std::abs(a - b);
  const double tail = std::exp(-lambda * gap);
  // weight on a is sigmoid(lambda (b - a))
  const double w_small = 1.0 / (1.0 + tail);
  return {lo - std::log1p(tail) / lambda, a <= b ? w_small : 1.0 - w_small};
}

// Smoothed delta on one subset plus, optionally, its gradient with respect
// to the subset-local pair variables (upper triangle of an s x s buffer,
// row-major). Quadruples are visited in lexicographic (x, y, z, w) order.
class SubsetEvaluator {
 public:
  SubsetEvaluator(const DistanceMatrix& d, std::span<const std::size_t> subset, double lambda)
      : s_(subset.size()), lambda_(lambda), local_(s_ * s_) {
    for (std::size_t a = 0; a < s_; ++a)
      for (std::size_t b = 0; b < s_; ++b) local_[a * s_ + b] = d(subset[a], subset[b]);
  }

  double value() {
    if (!value_) {
      double top = -std::numeric_limits<double>::infinity();
      for_each_term([&](std::size_t, std::size_t, std::size_t, std::size_t, double t, double) { top = std::max(top, t); });
      double sum = 0.0;
      for_each_term([&](std::size_t, std::size_t, std::size_t, std::size_t, double t, double) {
        sum += std::exp(lambda_ * (t - top));
      });
      value_ = top + std::log(sum) / lambda_;
    }
    return *value_;
  }

  // Local gradient, scaled by `scale`, as an s x s upper-triangular buffer.
  std::vector<double> gradient(double scale = 1.0) {
    const double delta = value();
    std::vector<double> g(s_ * s_, 0.0);
    auto acc = [&](std::size_t u, std::size_t v, double c) {
      if (u == v) return;
      if (u > v) std::swap(u, v);
      g[u * s_ + v] += c;
    };
    for_each_term([&](std::size_t x, std::size_t y, std::size_t z, std::size_t w, double t, double alpha) {
      const double p = scale * std::exp(lambda_ * (t - delta));
      if (p == 0.0) return;
      const double h = 0.5 * p;
      acc(x, w, -h * (1.0 - alpha));
      acc(y, w, h);
      acc(z, w, -h * alpha);
      acc(x, y, -h * alpha);
      acc(y, z, -h * (1.0 - alpha));
      acc(x, z, h);
    });
    return g;
  }

  std::size_t subset_size() const noexcept { return s_; }

 private:
  template <typename Visit>
  void for_each_term(Visit&& visit) const {
    const std::size_t s = s_;
    for (std::size_t x = 0; x < s; ++x) {
      const double* dx = &local_[x * s];
      for (std::size_t y = 0; y < s; ++y) {
        const double* dy = &local_[y * s];
        const double dxy = dx[y];
        for (std::size_t z = 0; z < s; ++z) {
          const double dyz = dy[z];
          const double dxz = dx[z];
          const double* dz = &local_[z * s];
          for (std::size_t w = 0; w < s; ++w) {
            const double a = 0.5 * (dx[w] + dy[w] - dxy);
            const double b = 0.5 * (dy[w] + dz[w] - dyz);
            const double c = 0.5 * (dx[w] + dz[w] - dxz);
            const auto soft = soft_min2(a, b, lambda_);
            visit(x, y, z, w, soft.value - c, soft.weight_a);
          }
        }
      }
    }
  }

  std::size_t s_;
  double lambda_;
  std::vector<double> local_;
  std::optional<double> value_;
};

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace detail

// Smoothed delta over all ordered quadruples of `subset` (default: every point).
inline double delta_smooth(const DistanceMatrix& d, const SmoothingParams& params,
                           std::optional<std::span<const std::size_t>> subset = std::nullopt) {
  params.validate();
  std::vector<std::size_t> all;
  std::span<const std::size_t> points;
  if (subset) {
    points = *subset;
  } else {
    all = detail::all_indices(d.size());
    points = all;
  }
  if (points.empty()) throw ValueError("delta_smooth: empty subset");
  for (auto i : points) d.check_index(i);
  detail::SubsetEvaluator eval(d, points, params.lambda);
  return eval.value();
}

struct BatchedDelta {
  double value = 0.0;
  std::vector<double> per_batch;
  GradientMatrix gradient;  // empty unless requested
};

// Value and, when with_gradient is set, the gradient of the batched estimate.
// accum_chunks > 1 computes per-batch gradients in that many sequential
// groups; batches are always folded into the total in batch order, so the
// result does not depend on the chunk or worker count.
inline BatchedDelta evaluate_delta_batched(const DistanceMatrix& d, const SmoothingParams& params,
                                           const BatchSet& batches, bool with_gradient,
                                           std::size_t accum_chunks = 1) {
  params.validate();
  batches.validate(d.size());
  const std::size_t k = batches.size();

  std::vector<detail::SubsetEvaluator> evals;
  evals.reserve(k);
  for (const auto& batch : batches.batches) evals.emplace_back(d, batch, params.lambda);

  BatchedDelta out;
  out.per_batch.resize(k);
  parallel_for(0, k, [&](std::size_t b) { out.per_batch[b] = evals[b].value(); });
  out.value = lse(out.per_batch, params.lambda);
  if (!with_gradient) return out;

  out.gradient = GradientMatrix(d.size());
  const std::size_t chunks = std::clamp<std::size_t>(accum_chunks, 1, k);
  const std::size_t per_chunk = (k + chunks - 1) / chunks;
  std::vector<std::vector<double>> local(std::min(per_chunk, k));
  for (std::size_t start = 0; start < k; start += per_chunk) {
    const std::size_t stop = std::min(k, start + per_chunk);
    parallel_for(start, stop, [&](std::size_t b) {
      const double outer = std::exp(params.lambda * (out.per_batch[b] - out.value));
      local[b - start] = evals[b].gradient(outer);
    });
    for (std::size_t b = start; b < stop; ++b) {
      const auto& batch = batches.batches[b];
      const std::size_t s = batch.size();
      const auto& g = local[b - start];
      for (std::size_t u = 0; u < s; ++u)
        for (std::size_t v = u + 1; v < s; ++v)
          if (g[u * s + v] != 0.0) out.gradient.add(batch[u], batch[v], g[u * s + v]);
    }
  }
  return out;
}

inline double delta_batched(const DistanceMatrix& d, const SmoothingParams& params, const BatchSet& batches) {
  return evaluate_delta_batched(d, params, batches, false).value;
}

inline GradientMatrix grad_delta_batched(const DistanceMatrix& d, const SmoothingParams& params,
                                         const BatchSet& batches) {
  return evaluate_delta_batched(d, params, batches, true).gradient;
}

}  // namespace treefit
