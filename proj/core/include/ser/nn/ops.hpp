#pragma once

// Forward and backward kernels for every layer kind. Activations are rank-4
// [N,C,H,W] for the convolutional part and rank-2 [N,D] for the classifier
// head. All kernels are instantiated for float (training and inference) and
// double (gradient checks).

#include <cstddef>
#include <vector>

#include "ser/rng.hpp"
#include "ser/tensor.hpp"

namespace ser::nn {

struct Conv2dGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

/// Cross-correlation with zero padding. input [N,Cin,H,W], weights
/// [Cout,Cin,kH,kW], bias [Cout]. Each output is bias + sum over (ci, kh, kw)
/// in lexicographic order.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                         Conv2dGeometry geometry);

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_output,
                               Conv2dGeometry geometry);

/// 2x2 window, stride 2, output H/2 x W/2 (odd trailing row/column dropped).
/// argmax holds, per output element, the flat input index that won; ties go to
/// the first element in row-major window order.
template <typename T>
struct PoolResult {
  Tensor<T> output;
  std::vector<std::size_t> argmax;
};

template <typename T>
PoolResult<T> maxpool2d_forward(const Tensor<T>& input);

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_output, const std::vector<std::size_t>& argmax,
                             const Shape& input_shape);

/// Saved state of a train-mode batch-norm forward pass.
template <typename T>
struct BatchNormCache {
  Tensor<T> normalized;          // x_hat, same shape as input
  std::vector<double> mean;      // per channel
  std::vector<double> variance;  // per channel, biased
  std::vector<double> inv_std;   // per channel
};

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  Tensor<T> gamma;
  Tensor<T> beta;
};

/// Normalizes each channel by its batch mean and biased variance.
/// Throws kDegenerateBatch when N*H*W < 2.
template <typename T>
Tensor<T> batchnorm2d_train_forward(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                                    double eps, BatchNormCache<T>& cache);

template <typename T>
Tensor<T> batchnorm2d_eval_forward(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                                   const Tensor<T>& running_mean, const Tensor<T>& running_var, double eps);

template <typename T>
BatchNormGrads<T> batchnorm2d_backward(const Tensor<T>& grad_output, const Tensor<T>& gamma,
                                       const BatchNormCache<T>& cache);

template <typename T>
Tensor<T> elu_forward(const Tensor<T>& input, double alpha = 1.0);

/// d/dx elu = 1 for x > 0, alpha * e^x otherwise.
template <typename T>
Tensor<T> elu_backward(const Tensor<T>& input, const Tensor<T>& grad_output, double alpha = 1.0);

/// Inverted dropout. mask receives 0 or 1/(1-rate) per element.
template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& input, double rate, CounterRng& rng, std::vector<T>& mask);

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_output, const std::vector<T>& mask);

template <typename T>
struct DenseGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

/// input [N,D], weights [D,K], bias [K] -> [N,K].
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_output);

/// Row-wise softmax with max subtraction. logits [N,K].
template <typename T>
Tensor<T> softmax_forward(const Tensor<T>& logits);

/// Vector-Jacobian product of softmax: p * (g - sum(p * g)) per row.
template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& probs, const Tensor<T>& grad_output);

/// Per-example standardization of a rank >= 2 tensor: subtract the example's
/// mean and divide by its standard deviation (floored at min_std). Statistics
/// are accumulated in double.
inline constexpr double kMinStd = 1e-6;

template <typename T>
struct StandardizeCache {
  Tensor<T> normalized;
  std::vector<double> inv_std;
  std::vector<bool> floored;
};

template <typename T>
Tensor<T> standardize_forward(const Tensor<T>& input, StandardizeCache<T>* cache = nullptr);

template <typename T>
Tensor<T> standardize_backward(const Tensor<T>& grad_output, const StandardizeCache<T>& cache);

}  // namespace ser::nn
