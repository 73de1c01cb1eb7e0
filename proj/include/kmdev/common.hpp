// Copyright 2026 The kmdev Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kmdev {

/// Raised when an input violates a documented assumption (ε ∉ (0,1),
/// zero-variance sample, missing moment for a tier, ...). The CLI maps it to
/// exit code 2.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed textual input (distribution strings, config files). CLI exit 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an internal identity or invariant fails. CLI exit code 3.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw PreconditionError(what);
}

/// Dense row-major n×d matrix of points.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw std::invalid_argument("matrix data size mismatch");
  }

  /// Column vector from scalars (d = 1).
  static Matrix column(std::vector<double> values) {
    const std::size_t n = values.size();
    return Matrix(n, 1, std::move(values));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix scaled(const Matrix& x, double lambda) {
  Matrix out = x;
  for (double& v : out.data()) v *= lambda;
  return out;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = a[j] - b[j];
    s += diff * diff;
  }
  return s;
}

namespace detail {
inline constexpr std::size_t kPairwiseBlock = 64;
}

/// Pairwise (cascade) summation of term(i) for i in [begin, end). The
/// recursion splits at fixed midpoints, so the reduction order depends only
/// on the range.
template <class Term>
double pairwise_sum(std::size_t begin, std::size_t end, const Term& term) {
  if (end - begin <= detail::kPairwiseBlock) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += term(i);
    return s;
  }
  const std::size_t mid = begin + (end - begin) / 2;
  return pairwise_sum(begin, mid, term) + pairwise_sum(mid, end, term);
}

inline double pairwise_sum(std::span<const double> values) {
  return pairwise_sum(0, values.size(), [&](std::size_t i) { return values[i]; });
}

/// Column means of x, each computed by pairwise summation.
inline std::vector<double> column_mean(const Matrix& x) {
  std::vector<double> mu(x.cols(), 0.0);
  const double n = static_cast<double>(x.rows());
  for (std::size_t j = 0; j < x.cols(); ++j)
    mu[j] = pairwise_sum(0, x.rows(), [&](std::size_t i) { return x(i, j); }) / n;
  return mu;
}

namespace detail {
/// Mean squared distance to the column mean.
inline double sample_variance(const Matrix& x) {
  const auto mu = column_mean(x);
  return pairwise_sum(0, x.rows(), [&](std::size_t i) { return squared_distance(x.row(i), mu); }) /
         static_cast<double>(x.rows());
}
}  // namespace detail

}  // namespace kmdev
