#include "gridfuse/depth_raster.hpp"

#include "gridfuse/errors.hpp"
#include "gridfuse/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gridfuse {

DepthMap::DepthMap(int width, int height, int buffer_radius)
    : width_(width), height_(height), buffer_radius_(buffer_radius) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("depth map dimensions must be positive");
  if (buffer_radius < 0) throw std::invalid_argument("buffer radius must be >= 0");
  cells_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), kEmpty);
}

npy::Array DepthMap::to_npy() const {
  return npy::make_array<float>(cells_, {static_cast<std::size_t>(height_), static_cast<std::size_t>(width_)});
}

DepthMap DepthMap::from_npy(const npy::Array& a, int buffer_radius) {
  if (a.shape.size() != 2) throw DataError("depth map array must be 2-D (height, width)");
  if (a.dtype != npy::DType::Float32) throw DataError("depth map array must be float32");
  DepthMap dm(static_cast<int>(a.shape[1]), static_cast<int>(a.shape[0]), buffer_radius);
  dm.cells_ = a.to_vector<float>();
  for (float v : dm.cells_)
    if (!(v > 0.0f)) throw DataError("depth map contains a non-positive or NaN cell");
  return dm;
}

void VisibilityConfig::validate() const {
  if (!(depth_tolerance > 0.0) || !std::isfinite(depth_tolerance))
    throw std::invalid_argument("depth tolerance must be finite and > 0");
  if (buffer_radius < 0) throw std::invalid_argument("buffer radius must be >= 0");
}

namespace {

struct Splat {
  int col;
  int row;
  float depth;
};

}  // namespace

DepthMap render_depth_map(const CameraIntrinsics& intr, const CameraPose& pose, std::span<const Vec3> positions,
                          int buffer_radius, unsigned threads) {
  intr.validate();
  DepthMap dm(intr.width, intr.height, buffer_radius);
  const unsigned workers = resolve_threads(threads);

  // Pass 1: project into per-chunk splat lists (concatenated in chunk order).
  std::vector<std::vector<Splat>> chunks(workers);
  parallel_chunks(positions.size(), workers, [&](std::size_t begin, std::size_t end, unsigned w) {
    auto& out = chunks[w];
    out.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      const ProjectionResult r = project(intr, pose, positions[i]);
      if (!r.in_frame()) continue;
      out.push_back({static_cast<int>(std::floor(r.pixel.x())), static_cast<int>(std::floor(r.pixel.y())),
                     static_cast<float>(r.depth)});
    }
  });

  // Pass 2: each worker owns a band of rows.
  const int h = intr.height, w = intr.width, rad = buffer_radius;
  auto cells = dm.mutable_cells();
  parallel_chunks(static_cast<std::size_t>(h), workers, [&](std::size_t row_begin, std::size_t row_end, unsigned) {
    const int rb = static_cast<int>(row_begin), re = static_cast<int>(row_end);
    for (const auto& chunk : chunks) {
      for (const Splat& s : chunk) {
        const int r0 = std::max(s.row - rad, rb), r1 = std::min(s.row + rad, re - 1);
        if (r0 > r1) continue;
        const int c0 = std::max(s.col - rad, 0), c1 = std::min(s.col + rad, w - 1);
        for (int r = r0; r <= r1; ++r) {
          float* line = cells.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(w);
          for (int c = c0; c <= c1; ++c) line[c] = std::min(line[c], s.depth);
        }
      }
    }
  });
  return dm;
}

bool is_visible(const DepthMap& depth_map, int col, int row, double depth, double tolerance) {
  if (!depth_map.contains(col, row))
    throw std::invalid_argument("pixel (" + std::to_string(col) + ", " + std::to_string(row) +
                                ") outside depth map");
  const float cell = depth_map.at(col, row);
  if (std::isinf(cell)) return false;
  return std::abs(static_cast<double>(cell) - depth) <= tolerance;
}

std::vector<std::size_t> visible_views(const Vec3& point, std::span<const Camera> cameras,
                                       std::span<const DepthMap> depth_maps, double tolerance) {
  if (cameras.size() != depth_maps.size())
    throw std::invalid_argument("visible_views: " + std::to_string(cameras.size()) + " cameras but " +
                                std::to_string(depth_maps.size()) + " depth maps");
  std::vector<std::size_t> views;
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    const auto& in = cameras[c].intrinsics;
    if (depth_maps[c].width() != in.width || depth_maps[c].height() != in.height)
      throw std::invalid_argument("depth map for camera '" + cameras[c].id + "' does not match its sensor size");
    const ProjectionResult r = project(cameras[c], point);
    if (!r.in_frame()) continue;
    const int col = static_cast<int>(std::floor(r.pixel.x()));
    const int row = static_cast<int>(std::floor(r.pixel.y()));
    if (is_visible(depth_maps[c], col, row, r.depth, tolerance)) views.push_back(c);
  }
  return views;
}

}  // namespace gridfuse
