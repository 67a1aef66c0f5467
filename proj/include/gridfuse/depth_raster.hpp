#pragma once

#include "gridfuse/geometry.hpp"
#include "gridfuse/npy.hpp"

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace gridfuse {

// Per-camera min-depth raster, row-major (row = floor(f_y), col = floor(f_x)).
// Empty cells hold +infinity.
class DepthMap {
 public:
  static constexpr float kEmpty = std::numeric_limits<float>::infinity();

  DepthMap() = default;
  DepthMap(int width, int height, int buffer_radius);

  int width() const { return width_; }
  int height() const { return height_; }
  int buffer_radius() const { return buffer_radius_; }

  float at(int col, int row) const { return cells_[index(col, row)]; }
  std::span<const float> cells() const { return cells_; }
  std::span<float> mutable_cells() { return cells_; }
  bool contains(int col, int row) const { return col >= 0 && row >= 0 && col < width_ && row < height_; }

  // (height, width) float32 array; the buffer radius is not part of the
  // payload and must be supplied on load.
  npy::Array to_npy() const;
  static DepthMap from_npy(const npy::Array& a, int buffer_radius);

  friend bool operator==(const DepthMap&, const DepthMap&) = default;

 private:
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
  }

  int width_ = 0;
  int height_ = 0;
  int buffer_radius_ = 0;
  std::vector<float> cells_;
};

struct VisibilityConfig {
  double depth_tolerance = 0.15;  // metres
  int buffer_radius = 2;          // pixels

  void validate() const;
};

// Projects every position; each in-frame point writes min(cell, depth) into
// the (2r+1)^2 neighbourhood of its floored pixel, clipped to the image.
// Rows are split into bands owned by one worker each, so the result does not
// depend on the thread count.
DepthMap render_depth_map(const CameraIntrinsics& intr, const CameraPose& pose, std::span<const Vec3> positions,
                          int buffer_radius, unsigned threads = 0);

// |depthmap(col, row) - depth| <= tolerance. Empty cells are never visible.
bool is_visible(const DepthMap& depth_map, int col, int row, double depth, double tolerance);

// Indices of the cameras that see `point`: in front, in frame and passing
// the depth-consistency test against that camera's depth map.
std::vector<std::size_t> visible_views(const Vec3& point, std::span<const Camera> cameras,
                                       std::span<const DepthMap> depth_maps, double tolerance);

}  // namespace gridfuse
