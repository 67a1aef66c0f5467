#include "gridfuse/errors.hpp"
#include "gridfuse/flight_plan.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

using namespace gridfuse;

namespace {

std::vector<PylonSpec> flat_pair(double z2 = 30.0) { return {{"a", 0, 0, 30}, {"b", 100, 0, z2}}; }

std::vector<Waypoint> pass_of(const FlightPlan& p, PassDirection d) {
  std::vector<Waypoint> out;
  for (const auto& w : p.waypoints)
    if (w.pass == d) out.push_back(w);
  return out;
}

std::vector<PylonSpec> random_line(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> step(30, 400), turn(-1.2, 1.2), top(15, 90);
  std::vector<PylonSpec> p;
  double x = 2.6e6 * (rng() % 2), y = 1.2e6, heading = turn(rng) * 3;
  const std::size_t n = 2 + rng() % 9;
  for (std::size_t i = 0; i < n; ++i) {
    p.push_back({"p" + std::to_string(i), x, y, top(rng)});
    heading += turn(rng);
    const double s = step(rng);
    x += s * std::cos(heading);
    y += s * std::sin(heading);
  }
  return p;
}

}  // namespace

TEST(FlightPlan, FlatPairAtFiftyFiveMetres) {
  FlightPlanConfig cfg;
  cfg.lateral_offset = 0.0;
  const auto pylons = flat_pair();
  const auto plan = plan_trajectory(pylons, cfg);
  const auto fwd = pass_of(plan, PassDirection::Forward), bwd = pass_of(plan, PassDirection::Backward);
  ASSERT_GE(fwd.size(), 2u);
  EXPECT_EQ(fwd.front().position, Vec3(0, 0, 55));
  EXPECT_EQ(fwd.back().position, Vec3(100, 0, 55));
  for (const auto& w : plan.waypoints) EXPECT_EQ(w.position.z(), 55.0);
  for (const auto& w : fwd) EXPECT_EQ(w.position.y(), 0.0);
  // backward pass retraces the line
  EXPECT_EQ(bwd.front().position, Vec3(100, 0, 55));
  EXPECT_EQ(bwd.back().position, Vec3(0, 0, 55));
  for (std::size_t i = 1; i < fwd.size(); ++i) EXPECT_GT(fwd[i].position.x(), fwd[i - 1].position.x());
  for (std::size_t i = 1; i < bwd.size(); ++i) EXPECT_LT(bwd[i].position.x(), bwd[i - 1].position.x());
  EXPECT_NEAR(fwd.front().heading, 0.0, 1e-15);
  EXPECT_NEAR(std::abs(bwd.front().heading), std::numbers::pi, 1e-15);
  EXPECT_EQ(plan.line_length, 100.0);
}

TEST(FlightPlan, OffsetIsRightOfTravel) {
  FlightPlanConfig cfg;
  cfg.lateral_offset = 5.0;
  const auto plan = plan_trajectory(flat_pair(), cfg);
  for (const auto& w : pass_of(plan, PassDirection::Forward)) EXPECT_EQ(w.position.y(), -5.0);
  for (const auto& w : pass_of(plan, PassDirection::Backward)) EXPECT_EQ(w.position.y(), 5.0);
}

TEST(FlightPlan, UTurnIsSemicircleAroundLastPylon) {
  FlightPlanConfig cfg;
  cfg.lateral_offset = 5.0;
  const auto plan = plan_trajectory(flat_pair(), cfg);
  const auto u = pass_of(plan, PassDirection::UTurn);
  // the arc ends coincide with the pass ends and give way to them
  ASSERT_EQ(u.size(), 3u);
  for (const auto& w : u) EXPECT_NEAR((w.position.head<2>() - Vec2(100, 0)).norm(), 5.0, 1e-12);
  EXPECT_NEAR(u[1].position.x(), 105.0, 1e-12);
  EXPECT_NEAR(u[1].heading, std::numbers::pi / 2, 1e-12);
  cfg.lateral_offset = 1.0;
  const auto wide = pass_of(plan_trajectory(flat_pair(), cfg), PassDirection::UTurn);
  EXPECT_NEAR(wide[2].position.x(), 105.0, 1e-12);  // minimum radius
}

TEST(FlightPlan, ElevationFollowsInterpolatedTops) {
  FlightPlanConfig cfg;
  const auto plan = plan_trajectory(flat_pair(50.0), cfg);
  for (const auto& w : pass_of(plan, PassDirection::Forward))
    EXPECT_NEAR(w.position.z(), 30.0 + 20.0 * w.position.x() / 100.0 + 25.0, 1e-12);
  for (const auto& w : pass_of(plan, PassDirection::Backward))
    EXPECT_NEAR(w.position.z(), 30.0 + 20.0 * w.position.x() / 100.0 + 25.0, 1e-12);
  EXPECT_DOUBLE_EQ(line_elevation(flat_pair(50.0), 25.0), 35.0);
}

TEST(FlightPlan, LookAheadDistance) {
  FlightPlanConfig cfg;
  EXPECT_NEAR(cfg.look_ahead(), 25.0 / std::tan(50.0 * std::numbers::pi / 180.0), 1e-12);
  EXPECT_NEAR(cfg.look_ahead(), 20.98, 0.005);
  cfg.depression_angle = std::numbers::pi / 2;
  EXPECT_LT(cfg.look_ahead(), 1e-14);
}

TEST(FlightPlan, SlowBeforePylon) {
  FlightPlanConfig cfg;
  const auto plan = plan_trajectory(flat_pair(), cfg);
  const double d = cfg.look_ahead();
  bool saw_start = false;
  for (const auto& w : pass_of(plan, PassDirection::Forward)) {
    if (w.station >= 100.0 - d - 1e-9) EXPECT_EQ(w.speed, cfg.v_min) << w.station;
    saw_start = saw_start || std::abs(w.station - (100.0 - d)) < 1e-9;
  }
  EXPECT_TRUE(saw_start);
  const std::vector<double> st{0.0, 100.0};
  EXPECT_EQ(speed_at_station(100.0 - d, st, cfg), cfg.v_min);
  EXPECT_EQ(speed_at_station(100.0 - d - 4.0, st, cfg), cfg.v_min + 2.0);
  EXPECT_EQ(speed_at_station(50.0, st, cfg), cfg.v_max);
}

TEST(FlightPlan, NadirSlowdownStartsAtPylon) {
  FlightPlanConfig cfg;
  cfg.depression_angle = std::numbers::pi / 2;
  const std::vector<double> st{0.0, 200.0};
  EXPECT_EQ(speed_at_station(200.0, st, cfg), cfg.v_min);
  EXPECT_GT(speed_at_station(199.0, st, cfg), cfg.v_min);
  const auto plan = plan_trajectory(std::vector<PylonSpec>{{"a", 0, 0, 30}, {"b", 200, 0, 30}}, cfg);
  for (const auto& w : pass_of(plan, PassDirection::Forward))
    if (w.station < 199.0 && w.station > 1.0) EXPECT_GT(w.speed, cfg.v_min);
}

TEST(FlightPlan, LongOpenSegmentAtMaxSpeed) {
  FlightPlanConfig cfg;
  const std::vector<double> st{0.0, 1000.0};
  for (double s = 20.0; s < 1000.0 - cfg.look_ahead() - 16.0; s += 7.0) EXPECT_EQ(speed_at_station(s, st, cfg), 10.0);
}

TEST(FlightPlan, RandomLinesKeepClearanceAndSpeedBounds) {
  std::mt19937_64 rng(61);
  FlightPlanConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    const auto pylons = random_line(rng);
    cfg.lateral_offset = 10.0 * double(rng() % 100) / 100.0;
    const auto plan = plan_trajectory(pylons, cfg);
    const double length = plan.line_length;
    for (std::size_t i = 0; i < plan.waypoints.size(); ++i) {
      const auto& w = plan.waypoints[i];
      const double fwd_station = w.pass == PassDirection::Backward ? length - w.station : w.station;
      EXPECT_GE(w.position.z(), line_elevation(pylons, fwd_station) + cfg.height_above - 1e-9);
      EXPECT_GE(w.speed, cfg.v_min);
      EXPECT_LE(w.speed, cfg.v_max);
      if (i > 0) {
        const auto& prev = plan.waypoints[i - 1];
        EXPECT_GT((w.position - prev.position).norm(), 1e-9);
        EXPECT_LE(std::abs(w.speed - prev.speed), cfg.max_speed_gradient * cfg.waypoint_spacing + 1e-9);
        if (w.pass == prev.pass && w.pass != PassDirection::UTurn)
          EXPECT_LE(std::abs(w.speed - prev.speed), cfg.max_speed_gradient * (w.station - prev.station) + 1e-9);
      }
    }
  }
}

TEST(FlightPlan, ReversedInputMirrorsPlan) {
  std::mt19937_64 rng(62);
  FlightPlanConfig cfg;
  for (int trial = 0; trial < 20; ++trial) {
    const auto pylons = random_line(rng);
    const std::vector<PylonSpec> reversed(pylons.rbegin(), pylons.rend());
    const auto a = plan_trajectory(pylons, cfg), b = plan_trajectory(reversed, cfg);
    auto key = [](const std::vector<Waypoint>& ws) {
      std::vector<std::array<double, 3>> k;
      for (const auto& w : ws) k.push_back({w.position.x(), w.position.y(), w.position.z()});
      std::sort(k.begin(), k.end());
      return k;
    };
    EXPECT_EQ(key(pass_of(a, PassDirection::Backward)), key(pass_of(b, PassDirection::Forward)));
    EXPECT_EQ(key(pass_of(a, PassDirection::Forward)), key(pass_of(b, PassDirection::Backward)));
  }
}

TEST(FlightPlan, RejectsBadInput) {
  FlightPlanConfig cfg;
  const std::vector<PylonSpec> one{{"a", 0, 0, 30}};
  EXPECT_THROW(plan_trajectory(one, cfg), std::invalid_argument);
  const std::vector<PylonSpec> same{{"a", 0, 0, 30}, {"b", 0, 0, 40}};
  EXPECT_THROW(plan_trajectory(same, cfg), std::invalid_argument);
  cfg.v_min = 12;
  EXPECT_THROW(plan_trajectory(flat_pair(), cfg), std::invalid_argument);
  cfg = {};
  cfg.depression_angle = 0;
  EXPECT_THROW(plan_trajectory(flat_pair(), cfg), std::invalid_argument);
  cfg = {};
  cfg.height_above = -1;
  EXPECT_THROW(plan_trajectory(flat_pair(), cfg), std::invalid_argument);
}

TEST(FlightPlan, TextFormats) {
  const auto p = parse_pylons("# id X Y Z\nA 10 20 35.5\nB 110 20 37 # end\n\n");
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[1].id, "B");
  EXPECT_EQ(p[1].z_top, 37.0);
  EXPECT_THROW(parse_pylons("A 1 2\n"), DataError);
  EXPECT_THROW(parse_pylons("A 1 2 3 4\n"), DataError);
  const auto text = format_plan(plan_trajectory(p, {}));
  EXPECT_EQ(text.rfind("# X Y Z speed heading pass\n", 0), 0u);
  EXPECT_NE(text.find("forward"), std::string::npos);
  EXPECT_NE(text.find("uturn"), std::string::npos);
  EXPECT_NE(text.find("backward"), std::string::npos);
}
