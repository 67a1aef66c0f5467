#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gridfuse {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DenseLayer {
  RowMatrix weights;  // outputs x inputs
  Eigen::VectorXd bias;

  int inputs() const { return static_cast<int>(weights.cols()); }
  int outputs() const { return static_cast<int>(weights.rows()); }
};

// Late-fusion classifier over concatenated [image logits | point logits]:
// dense layers with ReLU between them, raw class scores out.
class FusionModel {
 public:
  FusionModel() = default;
  explicit FusionModel(std::vector<DenseLayer> layers);

  // 2K -> hidden... -> K, He-normal weights, zero biases.
  static FusionModel create(int classes, const std::vector<int>& hidden, std::uint64_t seed);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  int classes() const { return layers_.empty() ? 0 : layers_.back().outputs(); }
  int input_width() const { return layers_.empty() ? 0 : layers_.front().inputs(); }
  std::size_t parameter_count() const;

  // Throws std::invalid_argument on broken chaining, 2K/K mismatch or
  // non-finite parameters.
  void validate() const;

  // Batched forward pass: inputs (N x 2K) -> scores (N x K).
  RowMatrix forward(const RowMatrix& inputs) const;

  friend bool operator==(const FusionModel& a, const FusionModel& b);

 private:
  std::vector<DenseLayer> layers_;
};

std::size_t fusion_parameter_count(int classes, const std::vector<int>& hidden);

std::vector<double> fuse_forward(const FusionModel& model, std::span<const double> image_logits,
                                 std::span<const double> point_logits);

std::vector<double> softmax(std::span<const double> scores);

// Training/evaluation samples; labels in 0..K-1.
struct FusionBatch {
  RowMatrix inputs;  // N x 2K
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  static FusionBatch from_logits(std::span<const float> image_logits, std::span<const float> point_logits,
                                 std::span<const std::uint8_t> labels, int classes);
};

struct FusionGradients {
  std::vector<RowMatrix> weights;
  std::vector<Eigen::VectorXd> biases;
  double loss = 0.0;

  double squared_norm() const;
};

// Mean (optionally class-weighted) softmax cross-entropy. `class_weights`
// is either empty or has one entry per class.
double fusion_loss(const FusionModel& model, const FusionBatch& batch, std::span<const double> class_weights = {});
FusionGradients fuse_gradient(const FusionModel& model, const FusionBatch& batch,
                              std::span<const double> class_weights = {});

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 100;
  std::size_t batch_size = 64;
  std::uint64_t seed = 42;
  double momentum = 0.9;
  bool class_weighting = false;
  std::vector<int> hidden{256, 256};

  void validate() const;
};

struct TrainResult {
  FusionModel model;
  std::vector<double> loss_history;  // full-data loss before training, then after each epoch
  double train_accuracy = 0.0;
  std::vector<std::string> warnings;
};

// Minibatch gradient descent (optional momentum). Samples labelled 255 are
// dropped. Identical inputs and seed give a bit-identical model.
TrainResult train_fusion(const FusionBatch& samples, int classes, const TrainConfig& config);

std::vector<std::uint8_t> predict_labels(const FusionModel& model, const RowMatrix& inputs);
double accuracy(const FusionModel& model, const FusionBatch& batch);

// Checkpoint layout (little-endian):
//   8 bytes  magic "GFMLP\0\0\1"
//   u32      layer count
//   per layer: u32 inputs, u32 outputs, outputs*inputs f64 weights (row-major),
//              outputs f64 biases
std::string serialize_model(const FusionModel& model);
FusionModel deserialize_model(std::string_view bytes);
void save_model(const std::filesystem::path& path, const FusionModel& model);
FusionModel load_model(const std::filesystem::path& path);

}  // namespace gridfuse
