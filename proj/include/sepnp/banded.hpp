#pragma once

// Band matrices and a band LU solve with partial pivoting.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sepnp/errors.hpp"

namespace sepnp {

// Square band matrix with `lower` sub- and `upper` super-diagonals. Each row
// stores columns [i - lower, i + upper + lower]; the extra `lower` columns hold
// fill-in produced by row interchanges during factorization.
class BandMatrix {
 public:
  BandMatrix() = default;
  BandMatrix(std::size_t n, std::size_t lower, std::size_t upper)
      : n_(n), lower_(lower), upper_(upper), width_(2 * lower + upper + 1), data_(n * width_, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  std::size_t lower() const noexcept { return lower_; }
  std::size_t upper() const noexcept { return upper_; }

  bool in_band(std::size_t i, std::size_t j) const noexcept {
    return j + lower_ >= i && j <= i + upper_;
  }

  double operator()(std::size_t i, std::size_t j) const noexcept {
    if (j + lower_ < i || j > i + upper_ + lower_) return 0.0;
    return data_[i * width_ + (j + lower_ - i)];
  }

  void add(std::size_t i, std::size_t j, double v) {
    if (!in_band(i, j)) throw DimensionError("entry outside matrix band");
    data_[i * width_ + (j + lower_ - i)] += v;
  }

  void set(std::size_t i, std::size_t j, double v) {
    if (!in_band(i, j)) throw DimensionError("entry outside matrix band");
    data_[i * width_ + (j + lower_ - i)] = v;
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  std::vector<double> multiply(std::span<const double> x) const {
    if (x.size() != n_) throw DimensionError("vector length does not match matrix");
    std::vector<double> y(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t j0 = i >= lower_ ? i - lower_ : 0;
      const std::size_t j1 = std::min(n_ - 1, i + upper_);
      double s = 0.0;
      for (std::size_t j = j0; j <= j1; ++j) s += (*this)(i, j) * x[j];
      y[i] = s;
    }
    return y;
  }

  // Maximum absolute row sum.
  double norm_inf() const {
    double best = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < width_; ++k) s += std::abs(data_[i * width_ + k]);
      best = std::max(best, s);
    }
    return best;
  }

 private:
  friend std::vector<double> solve_banded(BandMatrix a, std::vector<double> b);

  double& raw(std::size_t i, std::size_t j) { return data_[i * width_ + (j + lower_ - i)]; }

  std::size_t n_ = 0;
  std::size_t lower_ = 0;
  std::size_t upper_ = 0;
  std::size_t width_ = 1;
  std::vector<double> data_;
};

// Gaussian elimination with partial pivoting restricted to the band.
inline std::vector<double> solve_banded(BandMatrix a, std::vector<double> b) {
  const std::size_t n = a.n_;
  if (b.size() != n) throw DimensionError("right-hand side length does not match matrix");
  const std::size_t kl = a.lower_;
  const std::size_t reach = a.upper_ + a.lower_;
  const double anorm = a.norm_inf();
  const double tiny = std::numeric_limits<double>::epsilon() * anorm;
  if (!(anorm > 0.0) || !std::isfinite(anorm)) throw LinearSolveError("matrix is zero or not finite");

  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t last_row = std::min(n - 1, k + kl);
    const std::size_t last_col = std::min(n - 1, k + reach);
    std::size_t pivot = k;
    double best = std::abs(a.raw(k, k));
    for (std::size_t i = k + 1; i <= last_row; ++i) {
      if (std::abs(a.raw(i, k)) > best) {
        best = std::abs(a.raw(i, k));
        pivot = i;
      }
    }
    if (!(best > tiny)) throw LinearSolveError("matrix is numerically singular at row " + std::to_string(k));
    if (pivot != k) {
      for (std::size_t j = k; j <= last_col; ++j) std::swap(a.raw(k, j), a.raw(pivot, j));
      std::swap(b[k], b[pivot]);
    }
    const double diag = a.raw(k, k);
    for (std::size_t i = k + 1; i <= last_row; ++i) {
      const double factor = a.raw(i, k) / diag;
      if (factor == 0.0) continue;
      a.raw(i, k) = 0.0;
      for (std::size_t j = k + 1; j <= last_col; ++j) a.raw(i, j) -= factor * a.raw(k, j);
      b[i] -= factor * b[k];
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    const std::size_t last_col = std::min(n - 1, k + reach);
    double s = b[k];
    for (std::size_t j = k + 1; j <= last_col; ++j) s -= a.raw(k, j) * b[j];
    b[k] = s / a.raw(k, k);
  }
  return b;
}

// Block-tridiagonal system with square blocks of size `block`, stored as a band matrix.
struct SparseSystem {
  std::size_t block = 1;
  BandMatrix matrix;
  std::vector<double> rhs;

  SparseSystem() = default;
  SparseSystem(std::size_t n_blocks, std::size_t block_size)
      : block(block_size),
        matrix(n_blocks * block_size, 2 * block_size - 1, 2 * block_size - 1),
        rhs(n_blocks * block_size, 0.0) {}

  std::size_t size() const noexcept { return rhs.size(); }
};

inline std::vector<double> linear_solve(const SparseSystem& system) {
  return solve_banded(system.matrix, system.rhs);
}

}  // namespace sepnp
