#include "gridfuse/fusion_mlp.hpp"

#include "gridfuse/errors.hpp"
#include "gridfuse/npy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace gridfuse {

namespace {

constexpr char kMagic[8] = {'G', 'F', 'M', 'L', 'P', '\0', '\0', '\1'};

// Row-wise log-softmax, numerically stable.
RowMatrix log_softmax_rows(const RowMatrix& scores) {
  RowMatrix out(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double m = scores.row(i).maxCoeff();
    double s = 0.0;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) s += std::exp(scores(i, j) - m);
    const double lse = m + std::log(s);
    out.row(i) = scores.row(i).array() - lse;
  }
  return out;
}

void check_batch(const FusionModel& model, const FusionBatch& batch, std::span<const double> class_weights) {
  if (batch.size() == 0) throw std::invalid_argument("empty batch");
  if (batch.inputs.rows() != static_cast<Eigen::Index>(batch.size()) || batch.inputs.cols() != model.input_width())
    throw std::invalid_argument("batch inputs must be N x " + std::to_string(model.input_width()));
  const int k = model.classes();
  for (auto y : batch.labels)
    if (y >= k) throw std::invalid_argument("label " + std::to_string(y) + " outside 0.." + std::to_string(k - 1));
  if (!class_weights.empty() && class_weights.size() != static_cast<std::size_t>(k))
    throw std::invalid_argument("class weight count must equal class count");
}

double sample_weight(std::span<const double> class_weights, std::uint8_t y) {
  return class_weights.empty() ? 1.0 : class_weights[y];
}

}  // namespace

FusionModel::FusionModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { validate(); }

FusionModel FusionModel::create(int classes, const std::vector<int>& hidden, std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("fusion model needs at least 2 classes");
  std::vector<int> dims{2 * classes};
  for (int h : hidden) {
    if (h <= 0) throw std::invalid_argument("hidden widths must be positive");
    dims.push_back(h);
  }
  dims.push_back(classes);
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    layer.weights.resize(dims[l + 1], dims[l]);
    layer.bias = Eigen::VectorXd::Zero(dims[l + 1]);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / dims[l]));
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = dist(rng);
    layers.push_back(std::move(layer));
  }
  return FusionModel(std::move(layers));
}

std::size_t FusionModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

std::size_t fusion_parameter_count(int classes, const std::vector<int>& hidden) {
  std::size_t n = 0;
  std::size_t prev = 2 * static_cast<std::size_t>(classes);
  for (int h : hidden) {
    n += prev * h + h;
    prev = h;
  }
  return n + prev * classes + classes;
}

void FusionModel::validate() const {
  if (layers_.empty()) throw std::invalid_argument("fusion model has no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weights.rows())
      throw std::invalid_argument("layer " + std::to_string(l) + ": bias length does not match outputs");
    if (l > 0 && layer.inputs() != layers_[l - 1].outputs())
      throw std::invalid_argument("layer " + std::to_string(l) + ": input width does not chain");
    if (!layer.weights.allFinite() || !layer.bias.allFinite())
      throw std::invalid_argument("layer " + std::to_string(l) + ": non-finite parameters");
  }
  if (classes() < 2 || input_width() != 2 * classes())
    throw std::invalid_argument("fusion model must map 2K inputs to K >= 2 outputs");
}

RowMatrix FusionModel::forward(const RowMatrix& inputs) const {
  if (inputs.cols() != input_width()) throw std::invalid_argument("forward: input width mismatch");
  RowMatrix a = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    RowMatrix z = a * layers_[l].weights.transpose();
    z.rowwise() += layers_[l].bias.transpose();
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

bool operator==(const FusionModel& a, const FusionModel& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    const auto& x = a.layers_[l];
    const auto& y = b.layers_[l];
    if (x.weights.rows() != y.weights.rows() || x.weights.cols() != y.weights.cols()) return false;
    if (std::memcmp(x.weights.data(), y.weights.data(), sizeof(double) * x.weights.size()) != 0) return false;
    if (std::memcmp(x.bias.data(), y.bias.data(), sizeof(double) * x.bias.size()) != 0) return false;
  }
  return true;
}

std::vector<double> fuse_forward(const FusionModel& model, std::span<const double> image_logits,
                                 std::span<const double> point_logits) {
  const auto k = static_cast<std::size_t>(model.classes());
  if (image_logits.size() != k || point_logits.size() != k)
    throw std::invalid_argument("fuse_forward: expected two vectors of length " + std::to_string(k));
  RowMatrix x(1, 2 * k);
  for (std::size_t i = 0; i < k; ++i) {
    x(0, i) = image_logits[i];
    x(0, k + i) = point_logits[i];
  }
  const RowMatrix s = model.forward(x);
  return {s.data(), s.data() + s.size()};
}

std::vector<double> softmax(std::span<const double> scores) {
  if (scores.empty()) return {};
  const double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double s = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) s += out[i] = std::exp(scores[i] - m);
  for (double& v : out) v /= s;
  return out;
}

FusionBatch FusionBatch::from_logits(std::span<const float> image_logits, std::span<const float> point_logits,
                                     std::span<const std::uint8_t> labels, int classes) {
  const std::size_t n = labels.size();
  const auto k = static_cast<std::size_t>(classes);
  if (image_logits.size() != n * k || point_logits.size() != n * k)
    throw DataError("logit arrays must both be (N, " + std::to_string(classes) + ") with N = " + std::to_string(n));
  FusionBatch b;
  b.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(2 * k));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      b.inputs(i, j) = image_logits[i * k + j];
      b.inputs(i, k + j) = point_logits[i * k + j];
    }
  b.labels.assign(labels.begin(), labels.end());
  return b;
}

double FusionGradients::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weights) s += w.squaredNorm();
  for (const auto& b : biases) s += b.squaredNorm();
  return s;
}

double fusion_loss(const FusionModel& model, const FusionBatch& batch, std::span<const double> class_weights) {
  check_batch(model, batch, class_weights);
  const RowMatrix logp = log_softmax_rows(model.forward(batch.inputs));
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    loss -= sample_weight(class_weights, batch.labels[i]) * logp(static_cast<Eigen::Index>(i), batch.labels[i]);
  return loss / static_cast<double>(batch.size());
}

FusionGradients fuse_gradient(const FusionModel& model, const FusionBatch& batch,
                              std::span<const double> class_weights) {
  check_batch(model, batch, class_weights);
  const auto& layers = model.layers();
  const std::size_t depth = layers.size();
  const auto n = static_cast<Eigen::Index>(batch.size());

  // Forward, keeping pre-activations.
  std::vector<RowMatrix> acts{batch.inputs};
  std::vector<RowMatrix> pre;
  for (std::size_t l = 0; l < depth; ++l) {
    RowMatrix z = acts.back() * layers[l].weights.transpose();
    z.rowwise() += layers[l].bias.transpose();
    pre.push_back(z);
    if (l + 1 < depth) acts.push_back(z.cwiseMax(0.0));
  }

  const RowMatrix logp = log_softmax_rows(pre.back());
  FusionGradients g;
  g.weights.resize(depth);
  g.biases.resize(depth);
  RowMatrix delta = logp.array().exp();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = batch.labels[static_cast<std::size_t>(i)];
    const double w = sample_weight(class_weights, y);
    g.loss -= w * logp(i, y);
    delta(i, y) -= 1.0;
    delta.row(i) *= w / static_cast<double>(n);
  }
  g.loss /= static_cast<double>(n);

  for (std::size_t l = depth; l-- > 0;) {
    g.weights[l] = delta.transpose() * acts[l];
    g.biases[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    RowMatrix back = delta * layers[l].weights;
    delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return g;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning rate must be > 0");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
}

std::vector<std::uint8_t> predict_labels(const FusionModel& model, const RowMatrix& inputs) {
  const RowMatrix s = model.forward(inputs);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < s.cols(); ++j)
      if (s(i, j) > s(i, best)) best = j;
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(best);
  }
  return out;
}

double accuracy(const FusionModel& model, const FusionBatch& batch) {
  if (batch.size() == 0) return 0.0;
  const auto pred = predict_labels(model, batch.inputs);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == batch.labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

TrainResult train_fusion(const FusionBatch& samples, int classes, const TrainConfig& config) {
  config.validate();
  TrainResult result;

  FusionBatch data;
  {
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (samples.labels[i] != 255) keep.push_back(static_cast<Eigen::Index>(i));
    if (keep.empty()) throw std::invalid_argument("no labelled samples to train on");
    data.inputs.resize(static_cast<Eigen::Index>(keep.size()), samples.inputs.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) {
      data.inputs.row(static_cast<Eigen::Index>(i)) = samples.inputs.row(keep[i]);
      data.labels.push_back(samples.labels[static_cast<std::size_t>(keep[i])]);
    }
  }

  std::vector<std::size_t> counts(static_cast<std::size_t>(classes), 0);
  for (auto y : data.labels) {
    if (y >= classes) throw std::invalid_argument("label " + std::to_string(y) + " outside class range");
    ++counts[y];
  }
  const auto present = static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
  if (present < 2) result.warnings.push_back("training data contains a single class; the model is degenerate");

  std::vector<double> class_weights;
  if (config.class_weighting) {
    class_weights.assign(counts.size(), 0.0);
    for (std::size_t c = 0; c < counts.size(); ++c)
      if (counts[c] > 0)
        class_weights[c] = static_cast<double>(data.size()) / (static_cast<double>(present) * counts[c]);
  }

  FusionModel model = FusionModel::create(classes, config.hidden, config.seed);
  if (model.input_width() != data.inputs.cols())
    throw std::invalid_argument("sample width " + std::to_string(data.inputs.cols()) + " does not match 2K = " +
                                std::to_string(model.input_width()));

  std::vector<RowMatrix> vel_w;
  std::vector<Eigen::VectorXd> vel_b;
  for (const auto& l : model.layers()) {
    vel_w.push_back(RowMatrix::Zero(l.weights.rows(), l.weights.cols()));
    vel_b.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }

  std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  result.loss_history.push_back(fusion_loss(model, data, class_weights));

  FusionBatch mb;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      mb.inputs.resize(static_cast<Eigen::Index>(end - start), data.inputs.cols());
      mb.labels.resize(end - start);
      for (std::size_t i = start; i < end; ++i) {
        mb.inputs.row(static_cast<Eigen::Index>(i - start)) = data.inputs.row(static_cast<Eigen::Index>(order[i]));
        mb.labels[i - start] = data.labels[order[i]];
      }
      const FusionGradients g = fuse_gradient(model, mb, class_weights);
      auto& layers = model.layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        vel_w[l] = config.momentum * vel_w[l] - config.learning_rate * g.weights[l];
        vel_b[l] = config.momentum * vel_b[l] - config.learning_rate * g.biases[l];
        layers[l].weights += vel_w[l];
        layers[l].bias += vel_b[l];
      }
    }
    result.loss_history.push_back(fusion_loss(model, data, class_weights));
  }
  if (!std::isfinite(result.loss_history.back()))
    result.warnings.push_back("training diverged (non-finite loss); lower the learning rate");
  result.train_accuracy = accuracy(model, data);
  result.model = std::move(model);
  return result;
}

std::string serialize_model(const FusionModel& model) {
  model.validate();
  std::string out(kMagic, sizeof(kMagic));
  auto put = [&out](auto v) { out.append(reinterpret_cast<const char*>(&v), sizeof(v)); };
  put(static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& l : model.layers()) {
    put(static_cast<std::uint32_t>(l.inputs()));
    put(static_cast<std::uint32_t>(l.outputs()));
    out.append(reinterpret_cast<const char*>(l.weights.data()), sizeof(double) * l.weights.size());
    out.append(reinterpret_cast<const char*>(l.bias.data()), sizeof(double) * l.bias.size());
  }
  return out;
}

FusionModel deserialize_model(std::string_view bytes) {
  std::size_t pos = 0;
  auto take = [&](void* dst, std::size_t n) {
    if (pos + n > bytes.size()) throw DataError("model checkpoint truncated");
    std::memcpy(dst, bytes.data() + pos, n);
    pos += n;
  };
  char magic[8];
  take(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw DataError("not a fusion model checkpoint (bad magic)");
  std::uint32_t count = 0;
  take(&count, 4);
  if (count == 0 || count > 64) throw DataError("implausible layer count in checkpoint");
  std::vector<DenseLayer> layers;
  for (std::uint32_t l = 0; l < count; ++l) {
    std::uint32_t in = 0, out = 0;
    take(&in, 4);
    take(&out, 4);
    if (in == 0 || out == 0 || static_cast<std::uint64_t>(in) * out > bytes.size())
      throw DataError("implausible layer dimensions in checkpoint");
    DenseLayer layer;
    layer.weights.resize(out, in);
    layer.bias.resize(out);
    take(layer.weights.data(), sizeof(double) * layer.weights.size());
    take(layer.bias.data(), sizeof(double) * layer.bias.size());
    layers.push_back(std::move(layer));
  }
  if (pos != bytes.size()) throw DataError("trailing bytes after model checkpoint");
  try {
    return FusionModel(std::move(layers));
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid model checkpoint: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const FusionModel& model) {
  npy::write_file(path, serialize_model(model));
}

FusionModel load_model(const std::filesystem::path& path) {
  try {
    return deserialize_model(npy::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace gridfuse
