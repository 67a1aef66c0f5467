#include "gridfuse/errors.hpp"
#include "gridfuse/label_transfer.hpp"

#include "oracles.hpp"
#include "scenes.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace gridfuse;

namespace {

// One 8x8 image per camera, constant logits everywhere.
LogitImage constant_image(int w, int h, std::vector<float> v) {
  LogitImage img(w, h, int(v.size()));
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) std::copy(v.begin(), v.end(), img.at(c, r).begin());
  return img;
}

std::vector<double> weights_of(const scenes::VoteScene& s, const ViewWeighting& w, const Vec3& p) {
  std::vector<double> out;
  for (std::size_t c = 0; c < s.cameras.size(); ++c) out.push_back(w.weight(c, s.cameras[c], p));
  return out;
}

}  // namespace

TEST(Aggregate, SingleViewIsIdentity) {
  const std::vector<Camera> cams{scenes::make_camera("a", 8, 8, 4, Vec3(0, 0, 10))};
  const std::vector<LogitImage> imgs{constant_image(8, 8, {0.7f, 0.3f})};
  const std::vector<std::size_t> views{0};
  const auto l = aggregate_logits(Vec3(0, 0, 0), views, cams, imgs, ViewWeighting::uniform());
  ASSERT_TRUE(l);
  EXPECT_EQ(*l, (std::vector<double>{double(0.7f), double(0.3f)}));
}

TEST(Aggregate, InverseDistanceHandExample) {
  const std::vector<Camera> cams{scenes::make_camera("near", 8, 8, 4, Vec3(0, 0, 2)),
                                 scenes::make_camera("far", 8, 8, 4, Vec3(0, 0, 4))};
  const std::vector<LogitImage> imgs{constant_image(8, 8, {1, 0}), constant_image(8, 8, {0, 1})};
  const std::vector<std::size_t> views{0, 1};
  const auto l = aggregate_logits(Vec3(0, 0, 0), views, cams, imgs, ViewWeighting::inverse_distance());
  ASSERT_TRUE(l);
  EXPECT_EQ((*l)[0], 0.5);
  EXPECT_EQ((*l)[1], 0.25);
}

TEST(Aggregate, EmptyViewSetIsNoEvidence) {
  const std::vector<Camera> cams{scenes::make_camera("a", 8, 8, 4, Vec3(0, 0, 10))};
  const std::vector<LogitImage> imgs{constant_image(8, 8, {1, 0})};
  EXPECT_FALSE(aggregate_logits(Vec3(0, 0, 0), {}, cams, imgs, ViewWeighting::uniform()));
}

TEST(Aggregate, DimensionMismatchRejected) {
  const std::vector<Camera> cams{scenes::make_camera("a", 8, 8, 4, Vec3(0, 0, 10))};
  const std::vector<LogitImage> imgs{constant_image(9, 8, {1, 0})};
  const std::vector<std::size_t> views{0};
  EXPECT_THROW(aggregate_logits(Vec3(0, 0, 0), views, cams, imgs, ViewWeighting::uniform()), std::invalid_argument);
}

TEST(Aggregate, MatchesScalarLoopWithRandomWeights) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> w(0.1, 3.0);
  const auto s = scenes::vote_scene(21, 200, 5, 1);
  const auto weighting = ViewWeighting::per_view({w(rng), w(rng), w(rng)});
  for (const auto& p : s.cloud) {
    std::vector<std::size_t> views;
    std::vector<double> expect(5, 0.0);
    for (std::size_t c = 0; c < s.cameras.size(); ++c) {
      const auto q = oracle::project_scalar(s.cameras[c], p);
      if (!q.in_frame) continue;
      views.push_back(c);
      const auto v = s.logits[c].at(int(std::floor(q.fx)), int(std::floor(q.fy)));
      for (int j = 0; j < 5; ++j) expect[j] += weighting.custom[c] * v[j];
    }
    const auto got = aggregate_logits(p, views, s.cameras, s.logits, weighting);
    if (views.empty()) {
      EXPECT_FALSE(got);
      continue;
    }
    ASSERT_TRUE(got);
    for (int j = 0; j < 5; ++j) EXPECT_NEAR((*got)[j], expect[j], 1e-12);
  }
}

TEST(Argmax, TiesGoToLowestIndex) {
  EXPECT_EQ(argmax(std::vector<double>{1, 3, 3, 2}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{0, 0}), 0u);
  EXPECT_THROW(argmax(std::vector<double>{}), std::invalid_argument);
}

TEST(Transfer, SingleViewPicksPixelArgmax) {
  const std::vector<Camera> cams{scenes::make_camera("a", 8, 8, 4, Vec3(0, 0, 10))};
  const std::vector<LogitImage> imgs{constant_image(8, 8, {0, 1, 0, 5, 2})};
  const std::vector<Vec3> pts{Vec3(0.1, 0.1, 0), Vec3(0, 0, 20)};
  const std::vector<DepthMap> maps{render_depth_map(cams[0].intrinsics, cams[0].pose, pts, 2)};
  const auto r = transfer_labels(pts, cams, maps, imgs, {});
  EXPECT_EQ(r.labels, (std::vector<std::uint8_t>{3, kIgnoreLabel}));
  EXPECT_EQ(r.view_count, (std::vector<std::uint16_t>{1, 0}));
  EXPECT_EQ(r.logits[3], 5.0f);
  EXPECT_EQ(r.logits[8], 0.0f);
}

TEST(Transfer, MatchesBruteForceOnThreeCameraScene) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto s = scenes::vote_scene(seed, 1000, 6, 2);
    std::vector<std::vector<float>> cells;
    for (const auto& d : s.depth_maps) cells.emplace_back(d.cells().begin(), d.cells().end());
    TransferConfig cfg;
    const auto got = transfer_labels(s.cloud, s.cameras, s.depth_maps, s.logits, cfg);
    EXPECT_EQ(got.labels, oracle::transfer_brute(s.cloud, s.cameras, cells, s.logits, 0.15, {1, 1, 1}));
    const auto n_ignored = std::count(got.labels.begin(), got.labels.end(), kIgnoreLabel);
    EXPECT_LT(n_ignored, 1000);
  }
}

TEST(Transfer, InverseDistanceMatchesBruteForce) {
  const auto s = scenes::vote_scene(4, 800, 4, 2);
  std::vector<std::vector<float>> cells;
  for (const auto& d : s.depth_maps) cells.emplace_back(d.cells().begin(), d.cells().end());
  TransferConfig cfg;
  cfg.weighting = ViewWeighting::inverse_distance();
  const auto got = transfer_labels(s.cloud, s.cameras, s.depth_maps, s.logits, cfg);
  for (std::size_t i = 0; i < s.cloud.size(); ++i) {
    const std::vector<Vec3> one{s.cloud[i]};
    const auto expect = oracle::transfer_brute(one, s.cameras, cells, s.logits, 0.15, weights_of(s, cfg.weighting, s.cloud[i]));
    EXPECT_EQ(got.labels[i], expect[0]) << i;
  }
}

TEST(Transfer, RescalingWeightsKeepsLabels) {
  const auto s = scenes::vote_scene(5, 1000, 6, 2);
  TransferConfig a, b;
  a.weighting = ViewWeighting::per_view({0.5, 1.0, 2.0});
  b.weighting = ViewWeighting::per_view({4.0, 8.0, 16.0});
  EXPECT_EQ(transfer_labels(s.cloud, s.cameras, s.depth_maps, s.logits, a).labels,
            transfer_labels(s.cloud, s.cameras, s.depth_maps, s.logits, b).labels);
  TransferConfig u1, u2;
  u2.weighting = ViewWeighting::per_view({3.0, 3.0, 3.0});
  EXPECT_EQ(transfer_labels(s.cloud, s.cameras, s.depth_maps, s.logits, u1).labels,
            transfer_labels(s.cloud, s.cameras, s.depth_maps, s.logits, u2).labels);
}

TEST(Transfer, IndependentOfViewOrderAndThreads) {
  auto s = scenes::vote_scene(6, 1000, 5, 2);
  TransferConfig cfg;
  cfg.threads = 1;
  const auto ref = transfer_labels(s.cloud, s.cameras, s.depth_maps, s.logits, cfg);
  std::reverse(s.cameras.begin(), s.cameras.end());
  std::reverse(s.depth_maps.begin(), s.depth_maps.end());
  std::reverse(s.logits.begin(), s.logits.end());
  cfg.threads = 3;
  const auto got = transfer_labels(s.cloud, s.cameras, s.depth_maps, s.logits, cfg);
  EXPECT_EQ(got.labels, ref.labels);
  EXPECT_EQ(got.view_count, ref.view_count);
}

TEST(Transfer, RejectsInconsistentInputs) {
  const auto s = scenes::vote_scene(7, 100, 3, 1);
  TransferConfig cfg;
  std::vector<LogitImage> two(s.logits.begin(), s.logits.begin() + 2);
  EXPECT_THROW(transfer_labels(s.cloud, s.cameras, s.depth_maps, two, cfg), std::invalid_argument);
  cfg.weighting = ViewWeighting::per_view({1, 2});
  EXPECT_THROW(transfer_labels(s.cloud, s.cameras, s.depth_maps, s.logits, cfg), std::invalid_argument);
  cfg.weighting = ViewWeighting::per_view({0, 0, 0});
  EXPECT_THROW(transfer_labels(s.cloud, s.cameras, s.depth_maps, s.logits, cfg), std::invalid_argument);
  cfg.weighting = ViewWeighting::per_view({1, -1, 0});
  EXPECT_THROW(transfer_labels(s.cloud, s.cameras, s.depth_maps, s.logits, cfg), std::invalid_argument);
}

TEST(Sampling, BilinearAtCentreEqualsNearest) {
  LogitImage img(3, 3, 2);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      img.at(c, r)[0] = float(c + 10 * r);
      img.at(c, r)[1] = 1.0f;
    }
  std::vector<double> a(2, 0.0), b(2, 0.0);
  sample_logits(img, Vec2(1.5, 2.5), PixelSampling::Bilinear, 1.0, a);
  sample_logits(img, Vec2(1.5, 2.5), PixelSampling::Nearest, 1.0, b);
  EXPECT_EQ(a, b);
  std::vector<double> m(2, 0.0);
  sample_logits(img, Vec2(1.0, 1.0), PixelSampling::Bilinear, 2.0, m);  // average of four corners
  EXPECT_DOUBLE_EQ(m[0], 2.0 * (0 + 1 + 10 + 11) / 4.0);
  EXPECT_DOUBLE_EQ(m[1], 2.0);
}

TEST(LogitImage, NpyValidation) {
  const std::vector<float> v(2 * 3 * 4, 0.5f);
  const auto img = LogitImage::from_npy(npy::make_array<float>(v, {2, 3, 4}));
  EXPECT_EQ(img.width(), 3);
  EXPECT_EQ(img.height(), 2);
  EXPECT_EQ(img.classes(), 4);
  EXPECT_THROW(LogitImage::from_npy(npy::make_array<float>(v, {6, 4})), DataError);
  std::vector<float> bad = v;
  bad[3] = NAN;
  EXPECT_THROW(LogitImage::from_npy(npy::make_array<float>(bad, {2, 3, 4})), DataError);
}

TEST(ClassMapping, AllTableRows) {
  // original id -> training id, one row per original class
  const std::vector<std::pair<int, int>> rows{
      {0, 0},  {1, 0},  {2, 0},  {3, 0},  {4, 0},  {5, 1},  {6, 2},   {7, 2},
      {8, 3},  {9, 3},  {10, 3}, {11, 3}, {12, 255}, {13, 255}, {14, 4}, {15, 5},
      {16, 6}, {17, 7}, {18, 7}, {19, 8}, {20, 9}, {21, 10}, {255, 255}};
  ASSERT_EQ(rows.size(), 23u);
  const auto m = ClassMapping::gridnet();
  EXPECT_EQ(m.originals().size(), 23u);
  for (auto [o, t] : rows) EXPECT_EQ(m(std::uint8_t(o)), t) << "original " << o;
  std::vector<std::uint8_t> in;
  for (auto [o, t] : rows) in.push_back(std::uint8_t(o));
  const auto out = remap_labels(in, m);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(out[i], rows[i].second);
}

TEST(ClassMapping, UnknownIdRejected) {
  const auto m = ClassMapping::gridnet();
  const std::vector<std::uint8_t> in{3, 22};
  try {
    remap_labels(in, m);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("22"), std::string::npos);
  }
  EXPECT_THROW(m(100), DataError);
}

TEST(ClassMapping, ParseAndTextRoundTrip) {
  const auto m = ClassMapping::gridnet();
  const auto back = ClassMapping::parse(m.to_text());
  EXPECT_EQ(back.originals(), m.originals());
  for (auto id : m.originals()) EXPECT_EQ(back(id), m(id));
  EXPECT_THROW(ClassMapping::parse("1 2\n1 3\n"), DataError);
  EXPECT_THROW(ClassMapping::parse("1\n"), DataError);
  EXPECT_THROW(ClassMapping::parse("300 1\n"), DataError);
  const auto custom = ClassMapping::parse("# comment\n4 1  # trailing\n");
  const std::vector<std::uint8_t> in{4, 255};
  EXPECT_EQ(remap_labels(in, custom), (std::vector<std::uint8_t>{1, 255}));
}
