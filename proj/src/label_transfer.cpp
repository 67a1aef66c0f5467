#include "gridfuse/label_transfer.hpp"

#include "gridfuse/errors.hpp"
#include "gridfuse/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gridfuse {

LogitImage::LogitImage(int width, int height, int classes) : width_(width), height_(height), classes_(classes) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("logit image dimensions must be positive");
  if (classes < 2) throw std::invalid_argument("logit image needs at least 2 classes");
  values_.assign(static_cast<std::size_t>(width) * height * classes, 0.0f);
}

LogitImage LogitImage::from_npy(const npy::Array& a) {
  if (a.shape.size() != 3) throw DataError("logit image must be a 3-D (height, width, classes) array");
  if (a.dtype != npy::DType::Float32) throw DataError("logit image must be float32, got " + npy::dtype_descr(a.dtype));
  if (a.shape[2] < 2) throw DataError("logit image needs at least 2 classes");
  if (a.shape[0] == 0 || a.shape[1] == 0) throw DataError("logit image is empty");
  LogitImage img(static_cast<int>(a.shape[1]), static_cast<int>(a.shape[0]), static_cast<int>(a.shape[2]));
  img.values_ = a.to_vector<float>();
  for (float v : img.values_)
    if (!std::isfinite(v)) throw DataError("logit image contains a non-finite value");
  return img;
}

npy::Array LogitImage::to_npy() const {
  return npy::make_array<float>(values_, {std::size_t(height_), std::size_t(width_), std::size_t(classes_)});
}

void ViewWeighting::validate(std::size_t camera_count) const {
  if (mode != WeightingMode::Custom) return;
  if (custom.size() != camera_count)
    throw std::invalid_argument("custom weighting has " + std::to_string(custom.size()) + " weights for " +
                                std::to_string(camera_count) + " cameras");
  bool positive = false;
  for (double w : custom) {
    if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("custom view weights must be finite and >= 0");
    positive = positive || w > 0.0;
  }
  if (!positive) throw std::invalid_argument("custom weighting needs at least one positive weight");
}

double ViewWeighting::weight(std::size_t camera_index, const Camera& camera, const Vec3& point) const {
  switch (mode) {
    case WeightingMode::Uniform: return 1.0;
    case WeightingMode::InverseDistance: return 1.0 / std::max((camera.pose.position() - point).norm(), 1e-6);
    case WeightingMode::Custom: return custom.at(camera_index);
  }
  return 1.0;
}

void sample_logits(const LogitImage& image, const Vec2& pixel, PixelSampling sampling, double weight,
                   std::span<double> acc) {
  const int k = image.classes();
  if (sampling == PixelSampling::Nearest) {
    const auto v = image.at(static_cast<int>(std::floor(pixel.x())), static_cast<int>(std::floor(pixel.y())));
    for (int i = 0; i < k; ++i) acc[i] += weight * static_cast<double>(v[i]);
    return;
  }
  const double u = std::clamp(pixel.x() - 0.5, 0.0, double(image.width() - 1));
  const double v = std::clamp(pixel.y() - 0.5, 0.0, double(image.height() - 1));
  const int c0 = static_cast<int>(std::floor(u)), r0 = static_cast<int>(std::floor(v));
  const int c1 = std::min(c0 + 1, image.width() - 1), r1 = std::min(r0 + 1, image.height() - 1);
  const double du = u - c0, dv = v - r0;
  const double w00 = (1 - du) * (1 - dv), w10 = du * (1 - dv), w01 = (1 - du) * dv, w11 = du * dv;
  const auto a = image.at(c0, r0), b = image.at(c1, r0), c = image.at(c0, r1), d = image.at(c1, r1);
  for (int i = 0; i < k; ++i)
    acc[i] += weight * (w00 * a[i] + w10 * b[i] + w01 * c[i] + w11 * d[i]);
}

std::optional<std::vector<double>> aggregate_logits(const Vec3& point, std::span<const std::size_t> views,
                                                    std::span<const Camera> cameras,
                                                    std::span<const LogitImage> logits, const ViewWeighting& weighting,
                                                    PixelSampling sampling) {
  if (cameras.size() != logits.size()) throw std::invalid_argument("cameras and logit images must align 1:1");
  if (views.empty()) return std::nullopt;
  const int k = logits[views.front()].classes();
  std::vector<double> acc(static_cast<std::size_t>(k), 0.0);
  for (std::size_t v : views) {
    if (v >= cameras.size()) throw std::invalid_argument("view index out of range");
    const auto& img = logits[v];
    const auto& in = cameras[v].intrinsics;
    if (img.width() != in.width || img.height() != in.height)
      throw std::invalid_argument("logit image for camera '" + cameras[v].id + "' does not match its sensor size");
    if (img.classes() != k) throw std::invalid_argument("logit images disagree on the class count");
    const ProjectionResult r = project(cameras[v], point);
    if (!r.in_frame()) throw std::invalid_argument("point does not project into view '" + cameras[v].id + "'");
    sample_logits(img, r.pixel, sampling, weighting.weight(v, cameras[v], point), acc);
  }
  return acc;
}

std::size_t argmax(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

TransferResult transfer_labels(std::span<const Vec3> positions, std::span<const Camera> cameras,
                               std::span<const DepthMap> depth_maps, std::span<const LogitImage> logits,
                               const TransferConfig& config) {
  config.visibility.validate();
  if (cameras.empty()) throw std::invalid_argument("transfer_labels needs at least one camera");
  if (cameras.size() != depth_maps.size() || cameras.size() != logits.size())
    throw std::invalid_argument("cameras, depth maps and logit images must align 1:1");
  config.weighting.validate(cameras.size());
  const int k = logits.front().classes();
  if (k >= kIgnoreLabel) throw std::invalid_argument("class count must be below 255");
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    const auto& in = cameras[c].intrinsics;
    in.validate();
    if (logits[c].classes() != k)
      throw std::invalid_argument("logit image for camera '" + cameras[c].id + "' has " +
                                  std::to_string(logits[c].classes()) + " classes, expected " + std::to_string(k));
    if (logits[c].width() != in.width || logits[c].height() != in.height)
      throw std::invalid_argument("logit image for camera '" + cameras[c].id + "' does not match its sensor size");
    if (depth_maps[c].width() != in.width || depth_maps[c].height() != in.height)
      throw std::invalid_argument("depth map for camera '" + cameras[c].id + "' does not match its sensor size");
  }

  const std::size_t n = positions.size();
  TransferResult out;
  out.classes = k;
  out.labels.assign(n, kIgnoreLabel);
  out.logits.assign(n * static_cast<std::size_t>(k), 0.0f);
  out.view_count.assign(n, 0);
  const double tau = config.visibility.depth_tolerance;

  parallel_chunks(n, config.threads, [&](std::size_t begin, std::size_t end, unsigned) {
    std::vector<double> acc(static_cast<std::size_t>(k));
    for (std::size_t i = begin; i < end; ++i) {
      const Vec3& p = positions[i];
      std::fill(acc.begin(), acc.end(), 0.0);
      std::uint16_t views = 0;
      for (std::size_t c = 0; c < cameras.size(); ++c) {
        const ProjectionResult r = project(cameras[c], p);
        if (!r.in_frame()) continue;
        const int col = static_cast<int>(std::floor(r.pixel.x()));
        const int row = static_cast<int>(std::floor(r.pixel.y()));
        if (!is_visible(depth_maps[c], col, row, r.depth, tau)) continue;
        sample_logits(logits[c], r.pixel, config.sampling, config.weighting.weight(c, cameras[c], p), acc);
        ++views;
      }
      out.view_count[i] = views;
      if (views == 0) continue;
      out.labels[i] = static_cast<std::uint8_t>(argmax(acc));
      float* dst = out.logits.data() + i * static_cast<std::size_t>(k);
      for (int j = 0; j < k; ++j) dst[j] = static_cast<float>(acc[j]);
    }
  });
  return out;
}

namespace {

constexpr const char* kGridnetMapping = R"(# original  training  # original class -> training class
0    0    # Pylon foundation -> Pylon
1    0    # Cat head type pylon -> Pylon
2    0    # Triangle-arm pylon -> Pylon
3    0    # Portal pylon -> Pylon
4    0    # Other pylon -> Pylon
5    1    # Conductor cable -> Conductor cable
6    2    # Guard cable -> Structural cable
7    2    # Anchor cable -> Structural cable
8    3    # Suspension insulator - glass -> Insulator
9    3    # Strain insulator - glass -> Insulator
10   3    # Suspension insulator - porcelain -> Insulator
11   3    # Strain insulator - porcelain -> Insulator
12   255  # Other insulator -> Unassigned
13   255  # Signage -> Unassigned
14   4    # High vegetation -> High vegetation
15   5    # Low vegetation -> Low vegetation
16   6    # Herbaceous vegetation -> Herbaceous vegetation
17   7    # Rock -> Rock, gravel, soil
18   7    # Gravel, soil -> Rock, gravel, soil
19   8    # Impervious soil (Road) -> Impervious soil (Road)
20   9    # Water -> Water
21   10   # Building -> Building
255  255  # Unlabeled -> Unassigned
)";

}  // namespace

ClassMapping ClassMapping::gridnet() { return parse(kGridnetMapping); }

ClassMapping ClassMapping::parse(const std::string& text) {
  ClassMapping m;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    long long original = -1, training = -1;
    if (!(ls >> original)) continue;
    std::string rest;
    if (!(ls >> training) || (ls >> rest))
      throw DataError("class mapping line " + std::to_string(line_no) + ": expected 'original training'");
    if (original < 0 || original > 255 || training < 0 || training > 255)
      throw DataError("class mapping line " + std::to_string(line_no) + ": ids must be in 0..255");
    if (m.contains(static_cast<std::uint8_t>(original)))
      throw DataError("class mapping line " + std::to_string(line_no) + ": duplicate id " + std::to_string(original));
    m.set(static_cast<std::uint8_t>(original), static_cast<std::uint8_t>(training));
  }
  return m;
}

ClassMapping ClassMapping::load(const std::filesystem::path& path) {
  try {
    return parse(npy::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void ClassMapping::set(std::uint8_t original, std::uint8_t training) { table_[original] = training; }

std::uint8_t ClassMapping::operator()(std::uint8_t original) const {
  if (table_[original] < 0) throw DataError("label id " + std::to_string(original) + " has no class mapping");
  return static_cast<std::uint8_t>(table_[original]);
}

std::vector<std::uint8_t> ClassMapping::originals() const {
  std::vector<std::uint8_t> ids;
  for (int i = 0; i < 256; ++i)
    if (table_[i] >= 0) ids.push_back(static_cast<std::uint8_t>(i));
  return ids;
}

std::string ClassMapping::to_text() const {
  std::string out;
  for (auto id : originals()) out += std::to_string(id) + " " + std::to_string(table_[id]) + "\n";
  return out;
}

std::vector<std::uint8_t> remap_labels(std::span<const std::uint8_t> labels, const ClassMapping& mapping) {
  std::vector<std::uint8_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kIgnoreLabel && !mapping.contains(kIgnoreLabel)) {
      out[i] = kIgnoreLabel;
      continue;
    }
    if (!mapping.contains(labels[i]))
      throw DataError("label id " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                      " has no class mapping");
    out[i] = mapping(labels[i]);
  }
  return out;
}

}  // namespace gridfuse
