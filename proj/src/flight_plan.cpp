#include "gridfuse/flight_plan.hpp"

#include "gridfuse/errors.hpp"
#include "gridfuse/npy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace gridfuse {

void FlightPlanConfig::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(height_above) || height_above <= 0.0) throw std::invalid_argument("height above line must be > 0");
  if (!finite(depression_angle) || depression_angle <= 0.0 || depression_angle > std::numbers::pi / 2)
    throw std::invalid_argument("sensor depression angle must be in (0, 90] degrees");
  if (!finite(lateral_offset) || lateral_offset < 0.0) throw std::invalid_argument("lateral offset must be >= 0");
  if (!finite(v_min) || !finite(v_max) || v_min <= 0.0 || v_min > v_max)
    throw std::invalid_argument("speeds must satisfy 0 < v_min <= v_max");
  if (!finite(waypoint_spacing) || waypoint_spacing <= 0.0) throw std::invalid_argument("waypoint spacing must be > 0");
  if (!finite(max_speed_gradient) || max_speed_gradient <= 0.0)
    throw std::invalid_argument("maximum speed gradient must be > 0");
  if (!finite(uturn_min_radius) || uturn_min_radius <= 0.0) throw std::invalid_argument("U-turn radius must be > 0");
}

double FlightPlanConfig::look_ahead() const {
  const double d = height_above / std::tan(depression_angle);
  return std::max(d, 0.0);
}

namespace {

constexpr double kSameStation = 1e-6;

void check_pylons(std::span<const PylonSpec> pylons) {
  if (pylons.size() < 2) throw std::invalid_argument("a flight plan needs at least two pylons");
  for (std::size_t i = 0; i < pylons.size(); ++i) {
    const auto& p = pylons[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z_top))
      throw std::invalid_argument("pylon " + std::to_string(i) + " has non-finite coordinates");
    if (i > 0 && p.x == pylons[i - 1].x && p.y == pylons[i - 1].y)
      throw std::invalid_argument("pylons " + std::to_string(i - 1) + " and " + std::to_string(i) +
                                  " coincide in plan");
  }
}

std::vector<double> cumulative_stations(std::span<const PylonSpec> pylons) {
  std::vector<double> s{0.0};
  for (std::size_t i = 1; i < pylons.size(); ++i)
    s.push_back(s.back() + std::hypot(pylons[i].x - pylons[i - 1].x, pylons[i].y - pylons[i - 1].y));
  return s;
}

Vec2 right_of(const Vec2& dir) { return {dir.y(), -dir.x()}; }

// One pass along `pylons` in list order, offset to the right of travel.
std::vector<Waypoint> make_pass(std::span<const PylonSpec> pylons, const FlightPlanConfig& cfg, PassDirection pass) {
  const auto stations = cumulative_stations(pylons);
  const std::size_t segs = pylons.size() - 1;
  std::vector<Vec2> dirs(segs);
  for (std::size_t i = 0; i < segs; ++i)
    dirs[i] = Vec2(pylons[i + 1].x - pylons[i].x, pylons[i + 1].y - pylons[i].y).normalized();

  struct Sample {
    std::size_t seg;
    double t;
    bool vertex;  // exactly on pylon `seg` (t == 0) or on the final pylon
  };
  std::vector<Sample> samples;
  const double look = cfg.look_ahead();
  for (std::size_t i = 0; i < segs; ++i) {
    const double len = stations[i + 1] - stations[i];
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(len / cfg.waypoint_spacing - 1e-9)));
    std::vector<double> ts;
    for (std::size_t j = 0; j < n; ++j) ts.push_back(static_cast<double>(j) / static_cast<double>(n));
    // slowdown start before the next pylon
    if (look > kSameStation && look < len - kSameStation) {
      const double t = (len - look) / len;
      const bool dup = std::any_of(ts.begin(), ts.end(), [&](double u) { return std::abs(u - t) * len < kSameStation; });
      if (!dup) ts.push_back(t);
    }
    std::sort(ts.begin(), ts.end());
    for (double t : ts) samples.push_back({i, t, t == 0.0});
  }
  samples.push_back({segs - 1, 1.0, true});

  std::vector<Waypoint> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    const auto& a = pylons[s.seg];
    const auto& b = pylons[s.seg + 1];
    const Vec2 base(a.x + s.t * (b.x - a.x), a.y + s.t * (b.y - a.y));
    Vec2 offset = right_of(dirs[s.seg]) * cfg.lateral_offset;
    Vec2 heading_dir = dirs[s.seg];
    if (s.vertex && s.t == 0.0 && s.seg > 0) {
      // mitre between the incoming and outgoing offset lines
      const Vec2 r_in = right_of(dirs[s.seg - 1]);
      const Vec2 r_out = right_of(dirs[s.seg]);
      const double denom = 1.0 + r_in.dot(r_out);
      if (denom > 1e-6) offset = (r_in + r_out) / denom * cfg.lateral_offset;
    }
    const double z = a.z_top + s.t * (b.z_top - a.z_top) + cfg.height_above;
    Waypoint w;
    w.position = Vec3(base.x() + offset.x(), base.y() + offset.y(), z);
    w.heading = std::atan2(heading_dir.y(), heading_dir.x());
    w.pass = pass;
    w.station = stations[s.seg] + s.t * (stations[s.seg + 1] - stations[s.seg]);
    out.push_back(w);
  }
  return out;
}

bool same_xy(const Vec3& a, const Vec3& b) { return (a - b).norm() < 1e-9; }

}  // namespace

double line_elevation(std::span<const PylonSpec> pylons, double s) {
  const auto stations = cumulative_stations(pylons);
  if (s <= 0.0) return pylons.front().z_top;
  for (std::size_t i = 1; i < stations.size(); ++i)
    if (s <= stations[i]) {
      const double t = (s - stations[i - 1]) / (stations[i] - stations[i - 1]);
      return pylons[i - 1].z_top + t * (pylons[i].z_top - pylons[i - 1].z_top);
    }
  return pylons.back().z_top;
}

double speed_at_station(double station, std::span<const double> pylon_stations, const FlightPlanConfig& cfg) {
  const double look = cfg.look_ahead();
  double gap = std::numeric_limits<double>::infinity();
  for (double p : pylon_stations) {
    double d = 0.0;
    if (station < p - look)
      d = p - look - station;
    else if (station > p)
      d = station - p;
    gap = std::min(gap, d);
  }
  return std::min(cfg.v_max, cfg.v_min + cfg.max_speed_gradient * gap);
}

std::vector<double> speed_profile(const FlightPlan& plan, std::span<const PylonSpec> pylons,
                                  const FlightPlanConfig& cfg) {
  cfg.validate();
  check_pylons(pylons);
  const auto fwd = cumulative_stations(pylons);
  std::vector<double> bwd;
  for (auto it = fwd.rbegin(); it != fwd.rend(); ++it) bwd.push_back(fwd.back() - *it);
  std::vector<double> speeds;
  speeds.reserve(plan.waypoints.size());
  for (const auto& w : plan.waypoints) {
    switch (w.pass) {
      case PassDirection::Forward: speeds.push_back(speed_at_station(w.station, fwd, cfg)); break;
      case PassDirection::Backward: speeds.push_back(speed_at_station(w.station, bwd, cfg)); break;
      case PassDirection::UTurn: speeds.push_back(cfg.v_min); break;
    }
  }
  return speeds;
}

FlightPlan plan_trajectory(std::span<const PylonSpec> pylons, const FlightPlanConfig& cfg) {
  cfg.validate();
  check_pylons(pylons);
  FlightPlan plan;
  plan.pylon_stations = cumulative_stations(pylons);
  plan.line_length = plan.pylon_stations.back();

  auto forward = make_pass(pylons, cfg, PassDirection::Forward);
  std::vector<PylonSpec> reversed(pylons.rbegin(), pylons.rend());
  auto backward = make_pass(reversed, cfg, PassDirection::Backward);

  const auto& last = pylons.back();
  const auto& prev = pylons[pylons.size() - 2];
  const Vec2 u = Vec2(last.x - prev.x, last.y - prev.y).normalized();
  const Vec2 r = right_of(u);
  const double radius = std::max(cfg.lateral_offset, cfg.uturn_min_radius);
  std::vector<Waypoint> uturn;
  for (int i = 0; i < 5; ++i) {
    const double th = std::numbers::pi * i / 4.0;
    const Vec2 xy = Vec2(last.x, last.y) + radius * (std::cos(th) * r + std::sin(th) * u);
    const Vec2 tangent = -std::sin(th) * r + std::cos(th) * u;
    Waypoint w;
    w.position = Vec3(xy.x(), xy.y(), last.z_top + cfg.height_above);
    w.heading = std::atan2(tangent.y(), tangent.x());
    w.pass = PassDirection::UTurn;
    w.station = plan.line_length;
    uturn.push_back(w);
  }

  // Arc ends coincide with the pass ends when offset == radius; the pass
  // waypoint wins so both passes stay complete.
  auto append = [&plan](const Waypoint& w) {
    if (!plan.waypoints.empty() && same_xy(plan.waypoints.back().position, w.position)) {
      if (plan.waypoints.back().pass == PassDirection::UTurn && w.pass != PassDirection::UTurn)
        plan.waypoints.back() = w;
      return;
    }
    plan.waypoints.push_back(w);
  };
  for (const auto& w : forward) append(w);
  for (const auto& w : uturn) append(w);
  for (const auto& w : backward) append(w);

  const auto speeds = speed_profile(plan, pylons, cfg);
  for (std::size_t i = 0; i < speeds.size(); ++i) plan.waypoints[i].speed = speeds[i];
  return plan;
}

const char* pass_name(PassDirection pass) {
  switch (pass) {
    case PassDirection::Forward: return "forward";
    case PassDirection::UTurn: return "uturn";
    case PassDirection::Backward: return "backward";
  }
  return "?";
}

std::vector<PylonSpec> parse_pylons(const std::string& text) {
  std::vector<PylonSpec> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    PylonSpec p;
    if (!(ls >> p.id)) continue;
    std::string extra;
    if (!(ls >> p.x >> p.y >> p.z_top) || (ls >> extra))
      throw DataError("pylon file line " + std::to_string(line_no) + ": expected 'id X Y Z_top'");
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PylonSpec> load_pylons(const std::filesystem::path& path) {
  try {
    return parse_pylons(npy::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_plan(const FlightPlan& plan) {
  std::string out = "# X Y Z speed heading pass\n";
  char buf[160];
  for (const auto& w : plan.waypoints) {
    std::snprintf(buf, sizeof(buf), "%.3f %.3f %.3f %.3f %.6f %s\n", w.position.x(), w.position.y(), w.position.z(),
                  w.speed, w.heading, pass_name(w.pass));
    out += buf;
  }
  return out;
}

}  // namespace gridfuse
