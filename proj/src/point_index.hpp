#pragma once

#include <memory>
#include <vector>

#include "dfindex/jet.hpp"

namespace dfindex::detail {

/// Static spatial index over points of R^4 (Boost.Geometry R*-tree, bulk
/// loaded). Concurrent queries are safe.
class PointIndex {
 public:
  explicit PointIndex(const std::vector<Vec4>& points);
  ~PointIndex();
  PointIndex(const PointIndex&) = delete;
  PointIndex& operator=(const PointIndex&) = delete;

  /// Squared distance from point i to its k-th nearest other point
  /// (k clamped to size - 1); 0 for a single point.
  double kth_distance2(std::size_t i, std::size_t k) const;

  /// Indices of the k nearest points to x, nearest first.
  std::vector<std::size_t> nearest(const Vec4& x, std::size_t k) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  const std::vector<Vec4>& points_;
};

}  // namespace dfindex::detail
