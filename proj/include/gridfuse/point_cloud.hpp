#pragma once

#include "gridfuse/geometry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gridfuse {

using Rgb = std::array<std::uint8_t, 3>;

// Columnar point records. Optional columns, when present, have one entry
// per position.
struct PointCloud {
  std::vector<Vec3> positions;
  std::optional<std::vector<Rgb>> colors;
  std::optional<std::vector<float>> intensity;
  std::optional<std::vector<std::uint8_t>> labels;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  // Throws DataError if an optional column has the wrong length.
  void validate() const;
};

enum class PlyFormat { Ascii, BinaryLittleEndian };

// Reads the "vertex" element of a PLY file. x/y/z are required and may be
// stored as any numeric type; red/green/blue, intensity and label are picked
// up when present. Other elements and properties are skipped. Malformed
// input raises DataError.
PointCloud read_ply(const std::filesystem::path& path);
PointCloud parse_ply(const std::string& bytes);

// Writes x,y,z as double, red/green/blue as uchar, intensity as float and
// label as uchar.
std::string serialize_ply(const PointCloud& cloud, PlyFormat format);
void write_ply(const std::filesystem::path& path, const PointCloud& cloud, PlyFormat format);

}  // namespace gridfuse
