#include "sevq/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sevq/error.hpp"

namespace sevq {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "io";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kValue: return "value";
    case ErrorKind::kCorrupt: return "corrupt";
    case ErrorKind::kVersion: return "version";
    case ErrorKind::kRange: return "range";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kNoCandidate: return "no_candidate";
    case ErrorKind::kInvariant: return "invariant";
  }
  return "unknown";
}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorKind::kShape, "matrix data has " + std::to_string(data_.size()) +
                                       " values, expected " + std::to_string(rows_ * cols_));
  }
}

FeatureMatrix FeatureMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  const std::size_t cols = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) {
      throw Error(ErrorKind::kShape, "row " + std::to_string(r) + " has " +
                                         std::to_string(rows[r].size()) + " columns, expected " +
                                         std::to_string(cols));
    }
    data.insert(data.end(), rows[r].begin(), rows[r].end());
  }
  return FeatureMatrix(rows.size(), cols, std::move(data));
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
  FeatureMatrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) {
      throw Error(ErrorKind::kRange, "row index " + std::to_string(indices[i]) + " out of range");
    }
    std::ranges::copy(row(indices[i]), out.row(i).begin());
  }
  return out;
}

void FeatureMatrix::check_finite() const {
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) {
      if (!std::isfinite((*this)(r, c))) {
        throw Error(ErrorKind::kValue, "non-finite value at row " + std::to_string(r) +
                                           ", column " + std::to_string(c));
      }
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double c = dot(a, b) / (norm(a) * norm(b));
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace sevq
