#include "gridfuse/depth_raster.hpp"
#include "gridfuse/errors.hpp"

#include "oracles.hpp"
#include "scenes.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace gridfuse;

namespace {

Camera small_camera() { return scenes::make_camera("s", 64, 64, 40.0, Vec3(0, 0, 10)); }

std::vector<float> to_vec(const DepthMap& d) { return {d.cells().begin(), d.cells().end()}; }

Camera random_camera(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  auto c = scenes::make_camera("r", 64, 64, 30 + 20 * (u(rng) + 1), Vec3(2 * u(rng), 2 * u(rng), 12 + 3 * u(rng)),
                               0.2 * u(rng), 0.2 * u(rng), 3 * u(rng));
  c.intrinsics.cx = 3 * u(rng);
  c.intrinsics.cy = 3 * u(rng);
  c.intrinsics.k[0] = 0.02 * u(rng);
  return c;
}

}  // namespace

TEST(DepthMap, EmptyCloudIsAllEmpty) {
  const auto cam = small_camera();
  const auto d = render_depth_map(cam.intrinsics, cam.pose, {}, 2);
  EXPECT_TRUE(std::all_of(d.cells().begin(), d.cells().end(), [](float v) { return std::isinf(v); }));
}

TEST(DepthMap, SinglePointFillsBufferSquare) {
  const auto cam = small_camera();
  const std::vector<Vec3> pts{Vec3(0.01, 0.01, 0)};  // lands at (32.04, 32.04)
  const auto d = render_depth_map(cam.intrinsics, cam.pose, pts, 2);
  for (int row = 0; row < 64; ++row)
    for (int col = 0; col < 64; ++col) {
      const bool inside = std::abs(col - 32) <= 2 && std::abs(row - 32) <= 2;
      if (inside)
        EXPECT_EQ(d.at(col, row), 10.0f);
      else
        EXPECT_TRUE(std::isinf(d.at(col, row)));
    }
}

TEST(DepthMap, OverlappingPointsKeepNearest) {
  const auto cam = small_camera();
  const std::vector<Vec3> pts{Vec3(0.01, 0.01, 0), Vec3(0.01, 0.01, 4), Vec3(0.26, 0.01, 1)};
  const auto d = render_depth_map(cam.intrinsics, cam.pose, pts, 0);
  EXPECT_EQ(d.at(32, 32), 6.0f);
  // third point: x = 0.26/9 * 40 = 1.156 px right of centre
  EXPECT_EQ(d.at(33, 32), 9.0f);
}

TEST(DepthMap, BufferClippedAtBorder) {
  const auto cam = small_camera();
  // pixel (0.4, 0.4): x = -31.6/40 * 10
  const std::vector<Vec3> pts{Vec3(-7.9, 7.9, 0)};
  const auto d = render_depth_map(cam.intrinsics, cam.pose, pts, 2);
  const auto p = project(cam, pts[0]);
  ASSERT_TRUE(p.in_frame());
  const int c0 = int(std::floor(p.pixel.x())), r0 = int(std::floor(p.pixel.y()));
  int filled = 0;
  for (float v : d.cells()) filled += !std::isinf(v);
  const int cols = std::min(63, c0 + 2) - std::max(0, c0 - 2) + 1;
  const int rows = std::min(63, r0 + 2) - std::max(0, r0 - 2) + 1;
  EXPECT_EQ(filled, cols * rows);
}

TEST(DepthMap, BehindAndOutOfFramePointsIgnored) {
  const auto cam = small_camera();
  const std::vector<Vec3> pts{Vec3(0, 0, 11), Vec3(0, 0, 10), Vec3(100, 0, 0)};
  const auto d = render_depth_map(cam.intrinsics, cam.pose, pts, 2);
  EXPECT_TRUE(std::all_of(d.cells().begin(), d.cells().end(), [](float v) { return std::isinf(v); }));
}

TEST(DepthMap, MatchesBruteForceOracle) {
  std::mt19937_64 rng(11);
  for (int scene = 0; scene < 20; ++scene) {
    const auto cam = random_camera(rng);
    const auto pts = oracle::random_cloud(rng, 500 + rng() % 1500, -8, 8);
    const int r = int(rng() % 3);
    const auto d = render_depth_map(cam.intrinsics, cam.pose, pts, r, 1 + rng() % 4);
    EXPECT_EQ(to_vec(d), oracle::rasterize_brute(cam, pts, r)) << "scene " << scene;
  }
}

TEST(DepthMap, IndependentOfPointOrderAndThreads) {
  std::mt19937_64 rng(12);
  const auto cam = random_camera(rng);
  auto pts = oracle::random_cloud(rng, 5000, -8, 8);
  const auto ref = render_depth_map(cam.intrinsics, cam.pose, pts, 2, 1);
  std::shuffle(pts.begin(), pts.end(), rng);
  for (unsigned t : {1u, 2u, 3u, 7u, 16u}) EXPECT_EQ(render_depth_map(cam.intrinsics, cam.pose, pts, 2, t), ref);
}

TEST(DepthMap, AddingPointsNeverRaisesDepth) {
  std::mt19937_64 rng(13);
  const auto cam = random_camera(rng);
  auto pts = oracle::random_cloud(rng, 1000, -8, 8);
  const auto before = render_depth_map(cam.intrinsics, cam.pose, pts, 1);
  const auto extra = oracle::random_cloud(rng, 500, -8, 8);
  pts.insert(pts.end(), extra.begin(), extra.end());
  const auto after = render_depth_map(cam.intrinsics, cam.pose, pts, 1);
  for (std::size_t i = 0; i < after.cells().size(); ++i) EXPECT_LE(after.cells()[i], before.cells()[i]);
}

TEST(DepthMap, LargerBufferNeverRaisesDepth) {
  std::mt19937_64 rng(14);
  const auto cam = random_camera(rng);
  const auto pts = oracle::random_cloud(rng, 800, -8, 8);
  auto prev = render_depth_map(cam.intrinsics, cam.pose, pts, 0);
  for (int r = 1; r <= 3; ++r) {
    const auto cur = render_depth_map(cam.intrinsics, cam.pose, pts, r);
    for (std::size_t i = 0; i < cur.cells().size(); ++i) EXPECT_LE(cur.cells()[i], prev.cells()[i]);
    prev = cur;
  }
}

TEST(DepthMap, NpyRoundTripKeepsInfinity) {
  std::mt19937_64 rng(15);
  const auto cam = random_camera(rng);
  const auto d = render_depth_map(cam.intrinsics, cam.pose, oracle::random_cloud(rng, 300, -8, 8), 1);
  const auto a = d.to_npy();
  EXPECT_EQ(a.dtype, npy::DType::Float32);
  EXPECT_EQ(a.shape, (std::vector<std::size_t>{64, 64}));
  EXPECT_EQ(DepthMap::from_npy(npy::decode(npy::encode(a)), 1), d);
}

TEST(DepthMap, RejectsBadArguments) {
  const auto cam = small_camera();
  EXPECT_THROW(render_depth_map(cam.intrinsics, cam.pose, {}, -1), std::invalid_argument);
  const std::vector<Vec3> bad{Vec3(NAN, 0, 0)};
  EXPECT_THROW(render_depth_map(cam.intrinsics, cam.pose, bad, 1), std::invalid_argument);
  const std::vector<double> v{1, 2, 3};
  EXPECT_THROW(DepthMap::from_npy(npy::make_array<double>(v, {3}), 1), DataError);
}

TEST(Visibility, ToleranceIsInclusive) {
  DepthMap d(4, 4, 0);
  d.mutable_cells()[5] = 10.0f;
  EXPECT_TRUE(is_visible(d, 1, 1, 10.0, 0.0));
  EXPECT_TRUE(is_visible(d, 1, 1, 10.5, 0.5));
  EXPECT_FALSE(is_visible(d, 1, 1, 10.5001, 0.5));
  EXPECT_FALSE(is_visible(d, 0, 0, 10.0, 100.0));
  EXPECT_THROW(is_visible(d, 4, 0, 10.0, 1.0), std::invalid_argument);
}

TEST(Visibility, ConfigValidation) {
  VisibilityConfig c;
  EXPECT_EQ(c.depth_tolerance, 0.15);
  EXPECT_EQ(c.buffer_radius, 2);
  c.depth_tolerance = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.buffer_radius = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Visibility, WallHidesTargetFromNadirCamera) {
  const auto s = scenes::occlusion_scene();
  std::vector<DepthMap> maps;
  for (const auto& c : s.cameras) maps.push_back(render_depth_map(c.intrinsics, c.pose, s.cloud, 2));
  for (double tau : {0.01, 0.15, 1.0, 5.0, 9.99}) {
    EXPECT_EQ(visible_views(s.target, s.cameras, maps, tau), (std::vector<std::size_t>{1})) << tau;
  }
  for (double tau : {10.01, 15.0}) {
    EXPECT_EQ(visible_views(s.target, s.cameras, maps, tau), (std::vector<std::size_t>{0, 1})) << tau;
  }
}

TEST(Visibility, MismatchedDepthMapRejected) {
  const auto s = scenes::occlusion_scene();
  std::vector<DepthMap> maps{DepthMap(10, 10, 0), DepthMap(640, 480, 0)};
  EXPECT_THROW(visible_views(s.target, s.cameras, maps, 0.1), std::invalid_argument);
}
