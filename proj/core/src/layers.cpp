#include "ser/nn/layers.hpp"

#include <array>

namespace ser::nn {
namespace {

constexpr std::array<std::string_view, 9> kKindNames = {
    "standardize", "conv2d", "batchnorm2d", "elu", "maxpool2d", "dropout", "flatten", "dense", "softmax"};

}  // namespace

std::string_view to_string(LayerKind kind) noexcept { return kKindNames[static_cast<std::size_t>(kind)]; }

LayerKind parse_layer_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<LayerKind>(i);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown layer kind '" + std::string(name) + "'");
}

template <typename T>
Conv2d<T>::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
                  std::size_t padding)
    : geometry_{stride, padding},
      weights_{"weight", Tensor<T>({out_channels, in_channels, kernel, kernel}),
               Tensor<T>({out_channels, in_channels, kernel, kernel})},
      bias_{"bias", Tensor<T>({out_channels}), Tensor<T>({out_channels})} {
  if (in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0) {
    throw Error(ErrorCode::kInvalidArgument, "conv2d needs positive channels, kernel and stride");
  }
}

template <typename T>
LayerSpec Conv2d<T>::spec() const {
  return {.kind = LayerKind::kConv2d,
          .in_features = weights_.value.dim(1),
          .out_features = weights_.value.dim(0),
          .kernel = weights_.value.dim(2),
          .stride = geometry_.stride,
          .padding = geometry_.padding};
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& input) const {
  const std::size_t k = weights_.value.dim(2);
  if (input.size() != 3 || input[0] != weights_.value.dim(1) || input[1] + 2 * geometry_.padding < k ||
      input[2] + 2 * geometry_.padding < k) {
    throw Error(ErrorCode::kShapeMismatch, "conv2d cannot take input " + shape_string(input));
  }
  return {weights_.value.dim(0), (input[1] + 2 * geometry_.padding - k) / geometry_.stride + 1,
          (input[2] + 2 * geometry_.padding - k) / geometry_.stride + 1};
}

template <typename T>
Tensor<T> Conv2d<T>::infer(const Tensor<T>& input) const {
  return conv2d_forward(input, weights_.value, bias_.value, geometry_);
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& input, TrainContext&) {
  input_ = input;
  return infer(input);
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_output) {
  auto grads = conv2d_backward(input_, weights_.value, grad_output, geometry_);
  weights_.grad = std::move(grads.weights);
  bias_.grad = std::move(grads.bias);
  return std::move(grads.input);
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::size_t channels, double eps, double momentum)
    : eps_(eps),
      momentum_(momentum),
      gamma_{"gamma", Tensor<T>({channels}, T{1}), Tensor<T>({channels})},
      beta_{"beta", Tensor<T>({channels}), Tensor<T>({channels})},
      running_mean_{"running_mean", Tensor<T>({channels})},
      running_var_{"running_var", Tensor<T>({channels}, T{1})} {
  if (channels == 0) throw Error(ErrorCode::kInvalidArgument, "batchnorm2d needs at least one channel");
  if (!(eps > 0.0) || !(momentum >= 0.0 && momentum <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "batchnorm2d needs eps > 0 and momentum in [0, 1]");
  }
}

template <typename T>
LayerSpec BatchNorm2d<T>::spec() const {
  return {.kind = LayerKind::kBatchNorm2d, .in_features = gamma_.value.size(), .eps = eps_, .momentum = momentum_};
}

template <typename T>
Tensor<T> BatchNorm2d<T>::infer(const Tensor<T>& input) const {
  return batchnorm2d_eval_forward(input, gamma_.value, beta_.value, running_mean_.value, running_var_.value, eps_);
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& input, TrainContext&) {
  Tensor<T> out = batchnorm2d_train_forward(input, gamma_.value, beta_.value, eps_, cache_);
  for (std::size_t c = 0; c < gamma_.value.size(); ++c) {
    running_mean_.value[c] =
        static_cast<T>(momentum_ * running_mean_.value[c] + (1.0 - momentum_) * cache_.mean[c]);
    running_var_.value[c] =
        static_cast<T>(momentum_ * running_var_.value[c] + (1.0 - momentum_) * cache_.variance[c]);
  }
  return out;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& grad_output) {
  auto grads = batchnorm2d_backward(grad_output, gamma_.value, cache_);
  gamma_.grad = std::move(grads.gamma);
  beta_.grad = std::move(grads.beta);
  return std::move(grads.input);
}

template <typename T>
Dropout<T>::Dropout(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::kInvalidArgument, "dropout rate must be in [0, 1)");
}

template <typename T>
Dense<T>::Dense(std::size_t in_features, std::size_t out_features)
    : weights_{"weight", Tensor<T>({in_features, out_features}), Tensor<T>({in_features, out_features})},
      bias_{"bias", Tensor<T>({out_features}), Tensor<T>({out_features})} {
  if (in_features == 0 || out_features == 0) {
    throw Error(ErrorCode::kInvalidArgument, "dense needs positive input and output widths");
  }
}

template <typename T>
LayerSpec Dense<T>::spec() const {
  return {.kind = LayerKind::kDense, .in_features = weights_.value.dim(0), .out_features = weights_.value.dim(1)};
}

template <typename T>
Shape Dense<T>::output_shape(const Shape& input) const {
  if (input.size() != 1 || input[0] != weights_.value.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch, "dense cannot take input " + shape_string(input));
  }
  return {weights_.value.dim(1)};
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& grad_output) {
  auto grads = dense_backward(input_, weights_.value, grad_output);
  weights_.grad = std::move(grads.weights);
  bias_.grad = std::move(grads.bias);
  return std::move(grads.input);
}

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::kStandardize: return std::make_unique<Standardize<T>>();
    case LayerKind::kConv2d:
      return std::make_unique<Conv2d<T>>(spec.in_features, spec.out_features, spec.kernel, spec.stride, spec.padding);
    case LayerKind::kBatchNorm2d: return std::make_unique<BatchNorm2d<T>>(spec.in_features, spec.eps, spec.momentum);
    case LayerKind::kElu: return std::make_unique<Elu<T>>(spec.alpha);
    case LayerKind::kMaxPool2d: return std::make_unique<MaxPool2d<T>>();
    case LayerKind::kDropout: return std::make_unique<Dropout<T>>(spec.rate);
    case LayerKind::kFlatten: return std::make_unique<Flatten<T>>();
    case LayerKind::kDense: return std::make_unique<Dense<T>>(spec.in_features, spec.out_features);
    case LayerKind::kSoftmax: return std::make_unique<Softmax<T>>();
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown layer kind");
}

template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class Dropout<float>;
template class Dropout<double>;
template class Dense<float>;
template class Dense<double>;
template std::unique_ptr<Layer<float>> make_layer<float>(const LayerSpec&);
template std::unique_ptr<Layer<double>> make_layer<double>(const LayerSpec&);

}  // namespace ser::nn
