#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "treefit/error.hpp"

namespace treefit {

// Row-major n x n matrix with no structural constraints.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const noexcept { return n_; }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * n_, n_}; }

  std::span<const double> values() const noexcept { return data_; }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct DistanceTag {};
struct GradientTag {};

// Square matrix whose symmetry and zero diagonal are maintained by
// construction: set() writes both mirrored entries and refuses the diagonal.
// The Tag keeps distances and gradients from being mixed up.
template <typename Tag>
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

  // Throws DimensionError when ragged, ValueError when not symmetric or the
  // diagonal is nonzero.
  static SymmetricMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    SymmetricMatrix m(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size())
        throw DimensionError("row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                             " entries, expected " + std::to_string(rows.size()));
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i][i] != 0.0) throw ValueError("nonzero diagonal at " + std::to_string(i));
      for (std::size_t j = i + 1; j < rows.size(); ++j) {
        if (rows[i][j] != rows[j][i])
          throw ValueError("asymmetric entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
        m.set(i, j, rows[i][j]);
      }
    }
    return m;
  }

  static SymmetricMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<std::vector<double>> copy;
    for (const auto& r : rows) copy.emplace_back(r);
    return from_rows(copy);
  }

  std::size_t size() const noexcept { return n_; }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

  double at(std::size_t i, std::size_t j) const {
    check_index(i);
    check_index(j);
    return (*this)(i, j);
  }

  void set(std::size_t i, std::size_t j, double value) {
    if (i == j) return;
    data_[i * n_ + j] = value;
    data_[j * n_ + i] = value;
  }

  void add(std::size_t i, std::size_t j, double value) {
    if (i == j) return;
    data_[i * n_ + j] += value;
    data_[j * n_ + i] += value;
  }

  void check_index(std::size_t i) const {
    if (i >= n_) throw IndexError("index " + std::to_string(i) + " out of range for n=" + std::to_string(n_));
  }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }
  std::span<const double> values() const noexcept { return data_; }

  double max_entry() const {
    return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
  }

  friend bool operator==(const SymmetricMatrix&, const SymmetricMatrix&) = default;

 private:
  template <typename>
  friend class SymmetricMatrix;

  std::size_t n_ = 0;
  std::vector<double> data_;
};

// Distances between points. Nonnegativity is checked where matrices enter
// the library (loaders, from_rows callers, validate_metric); raw optimizer
// iterates use the same storage and may dip below zero before projection.
using DistanceMatrix = SymmetricMatrix<DistanceTag>;

// Partial derivatives with respect to unordered pair variables.
using GradientMatrix = SymmetricMatrix<GradientTag>;

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw DimensionError(std::string(what) + ": size mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
}

}  // namespace treefit
