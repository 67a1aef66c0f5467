// Synthetic scenes shared by unit and acceptance tests.
#pragma once

#include "gridfuse/depth_raster.hpp"
#include "gridfuse/fusion_mlp.hpp"
#include "gridfuse/geometry.hpp"
#include "gridfuse/label_transfer.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace scenes {

using gridfuse::Camera;
using gridfuse::Vec3;

inline Camera make_camera(std::string id, int width, int height, double f, Vec3 position, double omega = 0.0,
                          double phi = 0.0, double kappa = 0.0) {
  Camera c;
  c.id = std::move(id);
  c.intrinsics.width = width;
  c.intrinsics.height = height;
  c.intrinsics.f = f;
  c.pose = gridfuse::CameraPose(position, omega, phi, kappa);
  return c;
}

// Camera 0 looks straight down on the target from 20 m; a horizontal wall
// patch at z = 10 sits between them. Camera 1 sees the target obliquely from
// (15, 0, 20), well clear of the wall. Along camera 0's axis the wall is
// 10 m in front of the target.
struct OcclusionScene {
  std::vector<Camera> cameras;
  std::vector<Vec3> cloud;  // target first, then wall points
  Vec3 target{0.013, 0.007, 0.0};
  double clearance = 10.0;
};

inline OcclusionScene occlusion_scene() {
  OcclusionScene s;
  s.cameras.push_back(make_camera("nadir", 640, 480, 500.0, Vec3(0, 0, 20)));
  s.cameras.push_back(make_camera("oblique", 640, 480, 500.0, Vec3(15, 0, 20), 0.0, std::asin(0.6), 0.0));
  s.cloud.push_back(s.target);
  for (int i = -40; i <= 40; ++i)
    for (int j = -40; j <= 40; ++j) s.cloud.emplace_back(i * 0.025, j * 0.025, 10.0);
  return s;
}

// Ground points with a few raised boxes, three cameras at different poses,
// random planted logits per pixel.
struct VoteScene {
  std::vector<Camera> cameras;
  std::vector<Vec3> cloud;
  std::vector<gridfuse::LogitImage> logits;
  std::vector<gridfuse::DepthMap> depth_maps;
};

inline VoteScene vote_scene(std::uint64_t seed, std::size_t points, int classes, int buffer_radius) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> xy(-10.0, 10.0), u01(0.0, 1.0);
  VoteScene s;
  s.cameras.push_back(make_camera("a", 160, 120, 90.0, Vec3(0, 0, 25)));
  s.cameras.push_back(make_camera("b", 160, 120, 110.0, Vec3(-12, 3, 22), 0.1, -0.45, 0.3));
  s.cameras.push_back(make_camera("c", 160, 120, 100.0, Vec3(10, -8, 30), -0.3, 0.35, -1.2));
  s.cameras[2].intrinsics.k[0] = 0.02;
  s.cameras[2].intrinsics.p[0] = 1e-3;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = xy(rng), y = xy(rng);
    double z = 0.3 * u01(rng);
    if (std::abs(x - 3) < 2 && std::abs(y + 2) < 2) z += 4.0;  // box
    if (std::abs(x + 4) < 1.5 && std::abs(y - 5) < 3) z += 2.5;
    s.cloud.emplace_back(x, y, z);
  }
  std::normal_distribution<float> g(0.0f, 1.0f);
  for (const auto& cam : s.cameras) {
    gridfuse::LogitImage img(cam.intrinsics.width, cam.intrinsics.height, classes);
    for (int r = 0; r < img.height(); ++r)
      for (int c = 0; c < img.width(); ++c)
        for (auto& v : img.at(c, r)) v = g(rng);
    s.logits.push_back(std::move(img));
    s.depth_maps.push_back(gridfuse::render_depth_map(cam.intrinsics, cam.pose, s.cloud, buffer_radius, 1));
  }
  return s;
}

}  // namespace scenes

namespace scenes {

// K-class fusion samples: every class owns two Gaussian clusters in the
// concatenated 2K logit space, centres drawn well apart.
inline gridfuse::FusionBatch separable_fusion_task(std::uint64_t seed, int classes, std::size_t per_cluster,
                                                   double spread = 0.35) {
  std::mt19937_64 rng(seed);
  const int width = 2 * classes;
  std::vector<std::vector<double>> centres;
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  while (centres.size() < std::size_t(2 * classes)) {
    std::vector<double> c(static_cast<std::size_t>(width));
    for (auto& v : c) v = u(rng);
    bool apart = true;
    for (const auto& o : centres) {
      double d = 0;
      for (int j = 0; j < width; ++j) d += (c[j] - o[j]) * (c[j] - o[j]);
      apart = apart && std::sqrt(d) > 3.0;
    }
    if (apart) centres.push_back(std::move(c));
  }
  std::normal_distribution<double> g(0.0, spread);
  gridfuse::FusionBatch b;
  const std::size_t n = centres.size() * per_cluster;
  b.inputs.resize(Eigen::Index(n), width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < centres.size(); ++c)
    for (std::size_t i = 0; i < per_cluster; ++i, ++row) {
      for (int j = 0; j < width; ++j) b.inputs(Eigen::Index(row), j) = centres[c][j] + g(rng);
      b.labels.push_back(std::uint8_t(c / 2));
    }
  return b;
}

}  // namespace scenes
