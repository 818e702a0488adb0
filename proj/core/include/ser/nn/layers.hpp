#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ser/nn/ops.hpp"
#include "ser/rng.hpp"
#include "ser/tensor.hpp"

namespace ser::nn {

enum class LayerKind { kStandardize, kConv2d, kBatchNorm2d, kElu, kMaxPool2d, kDropout, kFlatten, kDense, kSoftmax };

std::string_view to_string(LayerKind kind) noexcept;
LayerKind parse_layer_kind(std::string_view name);

/// Architecture description of one layer; enough to rebuild it with fresh state.
struct LayerSpec {
  LayerKind kind = LayerKind::kElu;
  std::size_t in_features = 0;   // conv: in channels, dense: input width, batchnorm: channels
  std::size_t out_features = 0;  // conv: out channels, dense: output width
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  double rate = 0.0;             // dropout
  double alpha = 1.0;            // elu
  double eps = 1e-5;             // batchnorm
  double momentum = 0.9;         // batchnorm

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

/// Non-learned persistent state (batch-norm running statistics).
template <typename T>
struct Buffer {
  std::string name;
  Tensor<T> value;
};

/// State threaded through a train-mode forward pass.
struct TrainContext {
  CounterRng& dropout_rng;
};

/// One stage of the network.
///
/// infer() is the eval-mode pass: const and cache-free, safe to call from many
/// threads at once. forward() is the train-mode pass; it caches what
/// backward() needs, and backward() overwrites each parameter's grad.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerSpec spec() const = 0;
  /// Per-example output shape (no batch dimension) for a per-example input shape.
  virtual Shape output_shape(const Shape& input) const = 0;

  virtual Tensor<T> infer(const Tensor<T>& input) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& input, TrainContext& ctx) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_output) = 0;

  virtual std::vector<Parameter<T>*> parameters() { return {}; }
  virtual std::vector<const Parameter<T>*> parameters() const { return {}; }
  virtual std::vector<Buffer<T>*> buffers() { return {}; }
  virtual std::vector<const Buffer<T>*> buffers() const { return {}; }

  virtual std::unique_ptr<Layer> clone() const = 0;
};

/// Builds a layer with zero-initialized parameters (batch-norm gamma = 1,
/// running variance = 1). Throws kInvalidArgument for inconsistent specs.
template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec);

template <typename T>
class Standardize final : public Layer<T> {
 public:
  LayerSpec spec() const override { return {.kind = LayerKind::kStandardize}; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> infer(const Tensor<T>& input) const override { return standardize_forward(input); }
  Tensor<T> forward(const Tensor<T>& input, TrainContext&) override { return standardize_forward(input, &cache_); }
  Tensor<T> backward(const Tensor<T>& grad_output) override { return standardize_backward(grad_output, cache_); }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Standardize>(*this); }

 private:
  StandardizeCache<T> cache_;
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
         std::size_t padding);

  LayerSpec spec() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<T> infer(const Tensor<T>& input) const override;
  Tensor<T> forward(const Tensor<T>& input, TrainContext& ctx) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  std::vector<Parameter<T>*> parameters() override { return {&weights_, &bias_}; }
  std::vector<const Parameter<T>*> parameters() const override { return {&weights_, &bias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }

 private:
  Conv2dGeometry geometry_;
  Parameter<T> weights_;
  Parameter<T> bias_;
  Tensor<T> input_;
};

template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  BatchNorm2d(std::size_t channels, double eps, double momentum);

  LayerSpec spec() const override;
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> infer(const Tensor<T>& input) const override;
  /// Normalizes by batch statistics and folds them into the running
  /// statistics: r <- momentum * r + (1 - momentum) * batch.
  Tensor<T> forward(const Tensor<T>& input, TrainContext& ctx) override;
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  std::vector<Parameter<T>*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<const Parameter<T>*> parameters() const override { return {&gamma_, &beta_}; }
  std::vector<Buffer<T>*> buffers() override { return {&running_mean_, &running_var_}; }
  std::vector<const Buffer<T>*> buffers() const override { return {&running_mean_, &running_var_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm2d>(*this); }

 private:
  double eps_;
  double momentum_;
  Parameter<T> gamma_;
  Parameter<T> beta_;
  Buffer<T> running_mean_;
  Buffer<T> running_var_;
  BatchNormCache<T> cache_;
};

template <typename T>
class Elu final : public Layer<T> {
 public:
  explicit Elu(double alpha = 1.0) : alpha_(alpha) {}

  LayerSpec spec() const override { return {.kind = LayerKind::kElu, .alpha = alpha_}; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> infer(const Tensor<T>& input) const override { return elu_forward(input, alpha_); }
  Tensor<T> forward(const Tensor<T>& input, TrainContext&) override {
    input_ = input;
    return elu_forward(input, alpha_);
  }
  Tensor<T> backward(const Tensor<T>& grad_output) override { return elu_backward(input_, grad_output, alpha_); }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Elu>(*this); }

 private:
  double alpha_;
  Tensor<T> input_;
};

template <typename T>
class MaxPool2d final : public Layer<T> {
 public:
  LayerSpec spec() const override { return {.kind = LayerKind::kMaxPool2d, .kernel = 2, .stride = 2}; }
  Shape output_shape(const Shape& input) const override { return {input[0], input[1] / 2, input[2] / 2}; }
  Tensor<T> infer(const Tensor<T>& input) const override { return maxpool2d_forward(input).output; }
  Tensor<T> forward(const Tensor<T>& input, TrainContext&) override {
    input_shape_ = input.shape();
    auto result = maxpool2d_forward(input);
    argmax_ = std::move(result.argmax);
    return std::move(result.output);
  }
  Tensor<T> backward(const Tensor<T>& grad_output) override {
    return maxpool2d_backward(grad_output, argmax_, input_shape_);
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2d>(*this); }

 private:
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

template <typename T>
class Dropout final : public Layer<T> {
 public:
  explicit Dropout(double rate);

  LayerSpec spec() const override { return {.kind = LayerKind::kDropout, .rate = rate_}; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> infer(const Tensor<T>& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& input, TrainContext& ctx) override {
    return dropout_forward(input, rate_, ctx.dropout_rng, mask_);
  }
  Tensor<T> backward(const Tensor<T>& grad_output) override { return dropout_backward(grad_output, mask_); }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dropout>(*this); }

 private:
  double rate_;
  std::vector<T> mask_;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  LayerSpec spec() const override { return {.kind = LayerKind::kFlatten}; }
  Shape output_shape(const Shape& input) const override { return {shape_size(input)}; }
  Tensor<T> infer(const Tensor<T>& input) const override {
    return input.reshaped({input.dim(0), input.size() / input.dim(0)});
  }
  Tensor<T> forward(const Tensor<T>& input, TrainContext&) override {
    input_shape_ = input.shape();
    return infer(input);
  }
  Tensor<T> backward(const Tensor<T>& grad_output) override { return grad_output.reshaped(input_shape_); }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }

 private:
  Shape input_shape_;
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in_features, std::size_t out_features);

  LayerSpec spec() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<T> infer(const Tensor<T>& input) const override { return dense_forward(input, weights_.value, bias_.value); }
  Tensor<T> forward(const Tensor<T>& input, TrainContext&) override {
    input_ = input;
    return infer(input);
  }
  Tensor<T> backward(const Tensor<T>& grad_output) override;
  std::vector<Parameter<T>*> parameters() override { return {&weights_, &bias_}; }
  std::vector<const Parameter<T>*> parameters() const override { return {&weights_, &bias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }

 private:
  Parameter<T> weights_;
  Parameter<T> bias_;
  Tensor<T> input_;
};

template <typename T>
class Softmax final : public Layer<T> {
 public:
  LayerSpec spec() const override { return {.kind = LayerKind::kSoftmax}; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> infer(const Tensor<T>& input) const override { return softmax_forward(input); }
  Tensor<T> forward(const Tensor<T>& input, TrainContext&) override {
    probs_ = softmax_forward(input);
    return probs_;
  }
  Tensor<T> backward(const Tensor<T>& grad_output) override { return softmax_backward(probs_, grad_output); }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Softmax>(*this); }

 private:
  Tensor<T> probs_;
};

extern template class Conv2d<float>;
extern template class Conv2d<double>;
extern template class BatchNorm2d<float>;
extern template class BatchNorm2d<double>;
extern template class Dropout<float>;
extern template class Dropout<double>;
extern template class Dense<float>;
extern template class Dense<double>;

}  // namespace ser::nn
