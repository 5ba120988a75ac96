#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sevq {

/// Dense row-major matrix of doubles. One row per frame.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols);
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  /// Rows picked by index, in the given order.
  FeatureMatrix select_rows(std::span<const std::size_t> indices) const;

  /// Throws kValue naming the first non-finite cell.
  void check_finite() const;

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);

/// Cosine similarity clamped to [-1, 1]. Callers guarantee nonzero norms.
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace sevq
