#pragma once

#include "gridfuse/geometry.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace gridfuse {

// Camera file: JSON object {"cameras": [record, ...]} (a bare array is also
// accepted). Every record must carry
//   id, width, height, f, cx, cy, b1, b2, k1..k5, p1..p4,
//   x, y, z            camera centre, world metres
//   omega, phi, kappa  degrees
// Missing or mistyped fields raise DataError naming the record and field.
std::vector<Camera> parse_cameras(const std::string& json_text);
std::vector<Camera> load_cameras(const std::filesystem::path& path);

std::string serialize_cameras(const std::vector<Camera>& cameras);
void save_cameras(const std::filesystem::path& path, const std::vector<Camera>& cameras);

}  // namespace gridfuse
