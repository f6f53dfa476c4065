#pragma once

// Metric validation, Gromov products, brute-force hyperbolicity and
// distortion measures.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "treefit/error.hpp"
#include "treefit/matrix.hpp"
#include "treefit/parallel.hpp"

namespace treefit {

inline constexpr double kTriangleTolerance = 1e-9;

struct MetricReport {
  bool is_symmetric = true;
  bool zero_diagonal = true;
  bool nonnegative = true;
  // Ordered triples (i, j, k) with d(i,j) > d(i,k) + d(k,j) + tol.
  std::size_t triangle_violations = 0;
  // Largest slack d(i,j) - d(i,k) - d(k,j) among counted violations; 0 if none.
  double worst_violation = 0.0;

  bool is_metric() const {
    return is_symmetric && zero_diagonal && nonnegative && triangle_violations == 0;
  }
};

struct Quadruple {
  std::size_t i, j, k, l;
};

namespace detail {

template <typename Entry>
MetricReport validate_entries(std::size_t n, Entry&& d, double tol) {
  MetricReport report;
  for (std::size_t i = 0; i < n; ++i) {
    if (d(i, i) != 0.0) report.zero_diagonal = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (d(i, j) < 0.0) report.nonnegative = false;
      if (d(i, j) != d(j, i)) report.is_symmetric = false;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      for (std::size_t k = 0; k < n; ++k) {
        const double slack = d(i, j) - d(i, k) - d(k, j);
        if (slack > tol) {
          ++report.triangle_violations;
          report.worst_violation = std::max(report.worst_violation, slack);
        }
      }
    }
  }
  return report;
}

}  // namespace detail

inline MetricReport validate_metric(const std::vector<std::vector<double>>& rows,
                                    double tol = kTriangleTolerance) {
  if (tol < 0.0) throw ValueError("validate_metric: tolerance must be nonnegative");
  for (const auto& r : rows)
    if (r.size() != rows.size()) throw DimensionError("validate_metric: matrix is not square");
  return detail::validate_entries(
      rows.size(), [&](std::size_t i, std::size_t j) { return rows[i][j]; }, tol);
}

inline MetricReport validate_metric(const DistanceMatrix& d, double tol = kTriangleTolerance) {
  if (tol < 0.0) throw ValueError("validate_metric: tolerance must be nonnegative");
  return detail::validate_entries(d.size(), d, tol);
}

// (x|y)_w = (d(x,w) + d(y,w) - d(x,y)) / 2
inline double gromov_product(const DistanceMatrix& d, std::size_t x, std::size_t y, std::size_t w) {
  d.check_index(x);
  d.check_index(y);
  d.check_index(w);
  return 0.5 * (d(x, w) + d(y, w) - d(x, y));
}

// Half the gap between the two largest of the three pair sums.
inline double four_point_gap(double s1, double s2, double s3) {
  double largest = s1, second = s2;
  if (second > largest) std::swap(largest, second);
  if (s3 > largest) {
    second = largest;
    largest = s3;
  } else if (s3 > second) {
    second = s3;
  }
  return 0.5 * (largest - second);
}

inline double four_point_delta(const DistanceMatrix& d, const Quadruple& q) {
  d.check_index(q.i);
  d.check_index(q.j);
  d.check_index(q.k);
  d.check_index(q.l);
  return four_point_gap(d(q.i, q.j) + d(q.k, q.l), d(q.i, q.k) + d(q.j, q.l), d(q.i, q.l) + d(q.j, q.k));
}

// Gromov hyperbolicity by enumerating the C(n,4) unordered 4-subsets.
// Quadruples with repeated indices never exceed the distinct ones, and
// fewer than four points always give 0.
inline double delta_exact(const DistanceMatrix& d) {
  const std::size_t n = d.size();
  if (n < 4) return 0.0;
  std::vector<double> per_first(n, 0.0);
  parallel_for(0, n - 3, [&](std::size_t i) {
    double best = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dij = d(i, j);
      for (std::size_t k = j + 1; k < n; ++k) {
        const double dik = d(i, k), djk = d(j, k);
        const auto rk = d.row(k);
        const auto rj = d.row(j);
        const auto ri = d.row(i);
        for (std::size_t l = k + 1; l < n; ++l)
          best = std::max(best, four_point_gap(dij + rk[l], dik + rj[l], ri[l] + djk));
      }
    }
    per_first[i] = best;
  });
  return *std::max_element(per_first.begin(), per_first.end());
}

inline double distortion_linf(const DistanceMatrix& a, const DistanceMatrix& b) {
  require_same_size(a.size(), b.size(), "distortion_linf");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) worst = std::max(worst, std::abs(a(i, j) - b(i, j)));
  return worst;
}

// Mean absolute difference over the n(n-1)/2 unordered pairs.
inline double distortion_l1_avg(const DistanceMatrix& a, const DistanceMatrix& b) {
  require_same_size(a.size(), b.size(), "distortion_l1_avg");
  const std::size_t n = a.size();
  if (n < 2) throw DimensionError("distortion_l1_avg: need at least 2 points");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) total += std::abs(a(i, j) - b(i, j));
  return total / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

}  // namespace treefit
