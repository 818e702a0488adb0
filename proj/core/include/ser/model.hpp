#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ser/dataset.hpp"
#include "ser/dsp.hpp"
#include "ser/nn/layers.hpp"
#include "ser/tensor.hpp"

namespace ser::model {

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Ordered layer stack plus the metadata needed to interpret its output.
///
/// The stack begins with a per-input standardization stage and ends with a
/// softmax. infer() is const and may run concurrently; training mutates the
/// layers and needs exclusive access.
class SerModel {
 public:
  using LayerPtr = std::unique_ptr<nn::Layer<float>>;

  SerModel(std::vector<LayerPtr> layers, Shape input_shape,
           std::array<data::ClassLabel, data::kNumClasses> class_labels = data::all_class_labels());

  SerModel(const SerModel& other);
  SerModel& operator=(const SerModel& other);
  SerModel(SerModel&&) noexcept = default;
  SerModel& operator=(SerModel&&) noexcept = default;
  ~SerModel() = default;

  const Shape& input_shape() const noexcept { return input_shape_; }
  const std::array<data::ClassLabel, data::kNumClasses>& class_labels() const noexcept { return class_labels_; }
  std::uint32_t version() const noexcept { return kModelFormatVersion; }
  bool standardizes_input() const noexcept;

  std::size_t layer_count() const noexcept { return layers_.size(); }
  const nn::Layer<float>& layer(std::size_t i) const { return *layers_.at(i); }
  nn::Layer<float>& layer(std::size_t i) { return *layers_.at(i); }
  std::vector<nn::LayerSpec> architecture() const;

  /// Eval-mode pass over a [N, 1, n_mels, n_frames] batch; returns [N, 12] probabilities.
  Tensor<float> infer(const Tensor<float>& batch) const;

  /// Train-mode pass; returns probabilities and caches activations.
  Tensor<float> forward_train(const Tensor<float>& batch, nn::TrainContext& ctx);

  /// Backpropagates the gradient of the loss with respect to the logits (the
  /// softmax input) through every layer below the softmax.
  void backward_from_logits(const Tensor<float>& grad_logits);

  std::vector<nn::Parameter<float>*> parameters();
  std::vector<const nn::Parameter<float>*> parameters() const;
  std::vector<const nn::Buffer<float>*> buffers() const;
  std::vector<nn::Buffer<float>*> buffers();

  /// Learnable scalars.
  std::size_t parameter_count() const;
  /// Learnable plus buffer scalars: what the model file stores.
  std::size_t stored_scalar_count() const;

 private:
  void validate() const;

  std::vector<LayerPtr> layers_;
  Shape input_shape_;
  std::array<data::ClassLabel, data::kNumClasses> class_labels_;
};

struct ArchitectureOptions {
  std::array<std::size_t, 4> conv_channels = {16, 32, 64, 128};
  std::size_t kernel = 3;
  std::size_t hidden_units = 256;
  double conv_dropout = 0.25;
  double dense_dropout = 0.5;
  std::size_t n_mels = 128;
  std::size_t n_frames = dsp::kCanonicalFrames;
};

/// standardize -> 4 x [conv3x3 s1 p1 -> batchnorm -> ELU -> maxpool 2x2 -> dropout]
/// -> flatten -> dense(hidden) -> ELU -> dropout -> dense(12) -> softmax.
/// Conv and dense weights are He-uniform, U(-sqrt(6/fan_in), sqrt(6/fan_in)),
/// drawn in stack order from CounterRng(seed, "init"); biases zero.
SerModel build_ser_model(std::uint64_t seed, const ArchitectureOptions& options = {});

/// Closed-form learnable parameter count of build_ser_model(options).
std::size_t expected_parameter_count(const ArchitectureOptions& options = {});

struct RankedClass {
  data::ClassLabel label;
  double probability = 0.0;
};

struct PredictionResult {
  std::vector<RankedClass> ranked;  // descending probability, ties by class index
  data::ClassLabel top1;
};

/// Ranks a single probability row.
PredictionResult rank_probabilities(std::span<const float> probs,
                                    const std::array<data::ClassLabel, data::kNumClasses>& labels);

/// Wraps features as a [1, 1, n_mels, n_frames] batch.
Tensor<float> features_to_batch(const dsp::MelSpectrogram& features);
/// Stacks several spectrograms of identical shape into one batch.
Tensor<float> features_to_batch(std::span<const dsp::MelSpectrogram* const> features);

/// Throws kShapeMismatch unless features match the model's input shape.
PredictionResult predict(const SerModel& model, const dsp::MelSpectrogram& features);

/// Model file: "SERM", u32 version, u32 header length, JSON header
/// (architecture, class labels, tensor shapes), little-endian float32
/// parameters and buffers in stack order, then CRC-32 of header and payload.
std::vector<std::uint8_t> serialize_model(const SerModel& model);
SerModel deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const SerModel& model, const std::string& path);
SerModel load_model(const std::string& path);

/// CRC-32 of the model's serialized header and payload; a stable identifier
/// for a set of weights.
std::uint32_t model_fingerprint(const SerModel& model);

}  // namespace ser::model
