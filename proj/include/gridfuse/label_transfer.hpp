#pragma once

#include "gridfuse/depth_raster.hpp"
#include "gridfuse/geometry.hpp"
#include "gridfuse/npy.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gridfuse {

inline constexpr std::uint8_t kIgnoreLabel = 255;

// Per-pixel class scores laid out (height, width, classes).
class LogitImage {
 public:
  LogitImage() = default;
  LogitImage(int width, int height, int classes);

  int width() const { return width_; }
  int height() const { return height_; }
  int classes() const { return classes_; }

  std::span<const float> at(int col, int row) const { return {values_.data() + offset(col, row), std::size_t(classes_)}; }
  std::span<float> at(int col, int row) { return {values_.data() + offset(col, row), std::size_t(classes_)}; }
  std::span<const float> values() const { return values_; }

  // (H, W, K) float32; rejects K < 2 and non-finite entries.
  static LogitImage from_npy(const npy::Array& a);
  npy::Array to_npy() const;

 private:
  std::size_t offset(int col, int row) const {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col)) *
           static_cast<std::size_t>(classes_);
  }

  int width_ = 0;
  int height_ = 0;
  int classes_ = 0;
  std::vector<float> values_;
};

enum class WeightingMode { Uniform, InverseDistance, Custom };

struct ViewWeighting {
  WeightingMode mode = WeightingMode::Uniform;
  std::vector<double> custom;  // one weight per camera, Custom mode only

  static ViewWeighting uniform() { return {}; }
  static ViewWeighting inverse_distance() { return {WeightingMode::InverseDistance, {}}; }
  static ViewWeighting per_view(std::vector<double> weights) { return {WeightingMode::Custom, std::move(weights)}; }

  void validate(std::size_t camera_count) const;
  // InverseDistance: 1 / max(|S - p|, 1e-6).
  double weight(std::size_t camera_index, const Camera& camera, const Vec3& point) const;
};

enum class PixelSampling { Nearest, Bilinear };

struct TransferConfig {
  VisibilityConfig visibility;
  ViewWeighting weighting;
  PixelSampling sampling = PixelSampling::Nearest;
  unsigned threads = 0;
};

// Logit vector of `image` at a continuous pixel position. Nearest uses the
// floored pixel; Bilinear interpolates between pixel centres, clamped at the
// border.
void sample_logits(const LogitImage& image, const Vec2& pixel, PixelSampling sampling, double weight,
                   std::span<double> accumulator);

// Weighted sum of the logit vectors seen by `views`. Returns nullopt when
// `views` is empty (no evidence).
std::optional<std::vector<double>> aggregate_logits(const Vec3& point, std::span<const std::size_t> views,
                                                    std::span<const Camera> cameras,
                                                    std::span<const LogitImage> logits, const ViewWeighting& weighting,
                                                    PixelSampling sampling = PixelSampling::Nearest);

// First index of the maximum.
std::size_t argmax(std::span<const double> scores);

struct TransferResult {
  int classes = 0;
  std::vector<std::uint8_t> labels;       // kIgnoreLabel where no view contributes
  std::vector<float> logits;              // (N, classes), zeros for no-evidence points
  std::vector<std::uint16_t> view_count;  // |V(p)|
};

// Projects every point into every camera, keeps depth-consistent views and
// labels the point with the argmax of the aggregated logits.
TransferResult transfer_labels(std::span<const Vec3> positions, std::span<const Camera> cameras,
                               std::span<const DepthMap> depth_maps, std::span<const LogitImage> logits,
                               const TransferConfig& config);

// original id -> training id lookup table.
class ClassMapping {
 public:
  ClassMapping() { table_.fill(-1); }

  // The 22 -> 11 grouping used by the GridNet-HD training classes.
  static ClassMapping gridnet();
  // Text table, one "original training" pair per line; '#' starts a comment.
  static ClassMapping parse(const std::string& text);
  static ClassMapping load(const std::filesystem::path& path);

  void set(std::uint8_t original, std::uint8_t training);
  bool contains(std::uint8_t original) const { return table_[original] >= 0; }
  std::uint8_t operator()(std::uint8_t original) const;
  std::vector<std::uint8_t> originals() const;
  std::string to_text() const;

 private:
  std::array<std::int16_t, 256> table_{};
};

// Element-wise lookup; an id without an entry raises DataError naming it.
std::vector<std::uint8_t> remap_labels(std::span<const std::uint8_t> labels, const ClassMapping& mapping);

}  // namespace gridfuse
