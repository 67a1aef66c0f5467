#include "gridfuse/cloud_distance.hpp"

#include "gridfuse/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gridfuse {

KdTree::KdTree(std::span<const Vec3> points, std::size_t leaf_size)
    : points_(points.begin(), points.end()), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  if (points_.size() >= std::numeric_limits<std::uint32_t>::max())
    throw std::invalid_argument("k-d tree supports fewer than 2^32 points");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= leaf_size_) return id;

  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all points coincide

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
  nodes_[id].axis = axis;
  nodes_[id].split = points_[order_[mid]][axis];
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(std::int32_t id, const Vec3& q, Hit& best) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.left < 0) {
    for (std::uint32_t i = n.begin; i < n.end; ++i) {
      const double d = (points_[order_[i]] - q).squaredNorm();
      if (d < best.squared_distance) best = {order_[i], d};
    }
    return;
  }
  // Left child holds coordinates <= split, right child >= split.
  const double diff = q[n.axis] - n.split;
  const auto near = diff < 0 ? n.left : n.right;
  const auto far = diff < 0 ? n.right : n.left;
  search(near, q, best);
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

KdTree::Hit KdTree::nearest(const Vec3& query) const {
  if (points_.empty()) throw std::invalid_argument("nearest-neighbour query on an empty k-d tree");
  Hit best{0, std::numeric_limits<double>::infinity()};
  search(0, query, best);
  return best;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty set");
  q = std::clamp(q, 0.0, 1.0);
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + lo, values.end());
  const double a = values[lo];
  const double b = hi == lo ? a : *std::min_element(values.begin() + lo + 1, values.end());
  return a + (pos - static_cast<double>(lo)) * (b - a);
}

DistanceSummary summarize(std::span<const double> d) {
  DistanceSummary s;
  s.count = d.size();
  if (d.empty()) return s;
  std::vector<double> v(d.begin(), d.end());
  double sum = 0.0, sq = 0.0;
  for (double x : v) {
    sum += x;
    sq += x * x;
  }
  s.mean = sum / static_cast<double>(v.size());
  s.rms = std::sqrt(sq / static_cast<double>(v.size()));
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  s.median = quantile(v, 0.5);
  s.p90 = quantile(v, 0.9);
  s.p95 = quantile(v, 0.95);
  s.p99 = quantile(v, 0.99);
  return s;
}

CloudDistances cloud_to_cloud(std::span<const Vec3> compared, std::span<const Vec3> reference, unsigned threads) {
  if (reference.empty()) throw std::invalid_argument("cloud_to_cloud: reference cloud is empty");
  const KdTree tree(reference);
  CloudDistances out;
  out.distances.resize(compared.size());
  parallel_chunks(compared.size(), threads, [&](std::size_t b, std::size_t e, unsigned) {
    for (std::size_t i = b; i < e; ++i) out.distances[i] = std::sqrt(tree.nearest(compared[i]).squared_distance);
  });
  out.summary = summarize(out.distances);
  return out;
}

}  // namespace gridfuse
