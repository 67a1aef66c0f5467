#pragma once

#include "gridfuse/geometry.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gridfuse {

// Static 3-D k-d tree with exact nearest-neighbour queries.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points, std::size_t leaf_size = 8);

  struct Hit {
    std::size_t index = 0;
    double squared_distance = 0.0;
  };
  Hit nearest(const Vec3& query) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::uint32_t begin, end;  // range in order_
    std::int32_t left = -1, right = -1;
    int axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Vec3& q, Hit& best) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

struct DistanceSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double rms = 0.0;
  double min = 0.0;
  double median = 0.0;
  double p90 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};

struct CloudDistances {
  std::vector<double> distances;  // one per point of the compared cloud
  DistanceSummary summary;
};

// Linear-interpolation quantile (q in [0, 1]) of unsorted values.
double quantile(std::vector<double> values, double q);
DistanceSummary summarize(std::span<const double> distances);

// For every point of `compared`, the exact Euclidean distance to its nearest
// neighbour in `reference`. Throws std::invalid_argument if `reference` is
// empty.
CloudDistances cloud_to_cloud(std::span<const Vec3> compared, std::span<const Vec3> reference, unsigned threads = 0);

}  // namespace gridfuse
