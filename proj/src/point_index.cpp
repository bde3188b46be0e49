#include "point_index.hpp"

#include <algorithm>
#include <iterator>
#include <utility>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

namespace dfindex::detail {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

using BPoint = bg::model::point<double, 4, bg::cs::cartesian>;
using Value = std::pair<BPoint, std::size_t>;

namespace {

BPoint to_bpoint(const Vec4& x) {
  BPoint p;
  bg::set<0>(p, x[0]);
  bg::set<1>(p, x[1]);
  bg::set<2>(p, x[2]);
  bg::set<3>(p, x[3]);
  return p;
}

}  // namespace

struct PointIndex::Impl {
  bgi::rtree<Value, bgi::rstar<16>> tree;
};

PointIndex::PointIndex(const std::vector<Vec4>& points) : impl_(new Impl), points_(points) {
  std::vector<Value> values;
  values.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) values.emplace_back(to_bpoint(points[i]), i);
  impl_->tree = bgi::rtree<Value, bgi::rstar<16>>(values.begin(), values.end());
}

PointIndex::~PointIndex() = default;

std::vector<std::size_t> PointIndex::nearest(const Vec4& x, std::size_t k) const {
  std::vector<Value> hits;
  hits.reserve(k);
  impl_->tree.query(bgi::nearest(to_bpoint(x), static_cast<unsigned>(k)), std::back_inserter(hits));
  // The tree returns hits in no particular order; sort by distance, then index.
  std::vector<std::pair<double, std::size_t>> keyed;
  keyed.reserve(hits.size());
  for (const auto& h : hits) keyed.emplace_back((points_[h.second] - x).squaredNorm(), h.second);
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::size_t> out;
  out.reserve(keyed.size());
  for (const auto& kv : keyed) out.push_back(kv.second);
  return out;
}

double PointIndex::kth_distance2(std::size_t i, std::size_t k) const {
  const std::size_t n = points_.size();
  if (n <= 1) return 0.0;
  k = std::min(k, n - 1);
  double kth = 0.0;
  std::size_t seen = 0;
  for (std::size_t j : nearest(points_[i], k + 1)) {
    if (j == i) continue;
    kth = (points_[j] - points_[i]).squaredNorm();
    if (++seen == k) break;
  }
  return kth;
}

}  // namespace dfindex::detail
