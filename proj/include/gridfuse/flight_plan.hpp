#pragma once

#include "gridfuse/geometry.hpp"

#include <filesystem>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace gridfuse {

struct PylonSpec {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  double z_top = 0.0;  // elevation of the pylon top, metres
};

struct FlightPlanConfig {
  double height_above = 25.0;                             // clearance above the line, metres
  double depression_angle = 50.0 * std::numbers::pi / 180.0;  // sensor boresight below horizon, radians
  double lateral_offset = 5.0;                            // metres, to the right of travel
  double v_min = 2.0;                                     // m/s
  double v_max = 10.0;                                    // m/s
  double waypoint_spacing = 10.0;                         // metres along the line
  double max_speed_gradient = 0.5;                        // (m/s) per metre travelled
  double uturn_min_radius = 5.0;                          // metres

  void validate() const;
  // Distance before a pylon at which the boresight reaches its top:
  // height_above / tan(depression_angle).
  double look_ahead() const;
};

enum class PassDirection { Forward, UTurn, Backward };

struct Waypoint {
  Vec3 position;
  double speed = 0.0;    // m/s
  double heading = 0.0;  // radians, atan2(dy, dx) of the travel direction
  PassDirection pass = PassDirection::Forward;
  double station = 0.0;  // distance along the pylon line from the start of this pass
};

struct FlightPlan {
  std::vector<Waypoint> waypoints;
  std::vector<double> pylon_stations;  // cumulative horizontal distance, forward order
  double line_length = 0.0;
};

// Forward pass over the pylon line (offset to the right of travel), a
// five-point semicircular U-turn around the last pylon, then the backward
// pass (offset on the other side). Altitude is the linearly interpolated
// pylon-top elevation plus height_above. Speeds are filled in with
// speed_profile(). Throws std::invalid_argument for fewer than two pylons
// or coincident consecutive pylons.
FlightPlan plan_trajectory(std::span<const PylonSpec> pylons, const FlightPlanConfig& config);

// v_min from look_ahead() before each pylon up to the pylon itself, v_max
// away from pylons, with linear ramps limited by max_speed_gradient.
// U-turn waypoints fly at v_min.
std::vector<double> speed_profile(const FlightPlan& plan, std::span<const PylonSpec> pylons,
                                  const FlightPlanConfig& config);

// Target speed at pass-local `station` given the pass-local pylon stations.
double speed_at_station(double station, std::span<const double> pylon_stations, const FlightPlanConfig& config);

// Pylon line elevation (without clearance) at a forward station.
double line_elevation(std::span<const PylonSpec> pylons, double forward_station);

// Text tables. Pylons: "id X Y Z_top" per line. Plan: header line then
// "X Y Z speed heading pass" per waypoint; '#' comments.
std::vector<PylonSpec> parse_pylons(const std::string& text);
std::vector<PylonSpec> load_pylons(const std::filesystem::path& path);
std::string format_plan(const FlightPlan& plan);
const char* pass_name(PassDirection pass);

}  // namespace gridfuse
