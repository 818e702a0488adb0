#include "ser/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ser::nn {
namespace {

void require_rank(const Shape& shape, std::size_t rank, const char* what) {
  if (shape.size() != rank) {
    throw Error(ErrorCode::kShapeMismatch, std::string(what) + " expects rank " + std::to_string(rank) +
                                               ", got " + shape_string(shape));
  }
}

std::size_t conv_out_dim(std::size_t in, std::size_t kernel, Conv2dGeometry g) {
  return (in + 2 * g.padding - kernel) / g.stride + 1;
}

// Output positions ow in [lo, hi) whose input column ow*stride + k - padding
// falls inside [0, width).
struct Range {
  std::size_t lo;
  std::size_t hi;
};

Range valid_outputs(std::size_t width, std::size_t out_width, std::size_t k, Conv2dGeometry g) {
  const auto s = static_cast<std::ptrdiff_t>(g.stride);
  const auto offset = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(g.padding);
  // smallest ow with ow*s + offset >= 0
  std::ptrdiff_t lo = offset >= 0 ? 0 : (-offset + s - 1) / s;
  // largest ow with ow*s + offset <= width - 1
  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(width) - 1 - offset;
  std::ptrdiff_t hi = last < 0 ? 0 : last / s + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_width));
  lo = std::min(lo, hi);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                         Conv2dGeometry g) {
  require_rank(input.shape(), 4, "conv2d input");
  require_rank(weights.shape(), 4, "conv2d weights");
  const std::size_t n_batch = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t c_out = weights.dim(0), kh_n = weights.dim(2), kw_n = weights.dim(3);
  if (weights.dim(1) != c_in || bias.size() != c_out) {
    throw Error(ErrorCode::kShapeMismatch, "conv2d weights " + shape_string(weights.shape()) + " / bias " +
                                               shape_string(bias.shape()) + " vs input " + shape_string(input.shape()));
  }
  if (g.stride == 0) throw Error(ErrorCode::kShapeMismatch, "conv2d stride must be at least 1");
  if (h + 2 * g.padding < kh_n || w + 2 * g.padding < kw_n) {
    throw Error(ErrorCode::kShapeMismatch, "conv2d kernel larger than padded input " + shape_string(input.shape()));
  }
  const std::size_t ho = conv_out_dim(h, kh_n, g), wo = conv_out_dim(w, kw_n, g);

  Tensor<T> out({n_batch, c_out, ho, wo});
  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t co = 0; co < c_out; ++co) {
      T* plane = &out.at(n, co, 0, 0);
      std::fill(plane, plane + ho * wo, bias[co]);
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const T* src = &input.at(n, ci, 0, 0);
        for (std::size_t kh = 0; kh < kh_n; ++kh) {
          for (std::size_t kw = 0; kw < kw_n; ++kw) {
            const T wv = weights.at(co, ci, kh, kw);
            const Range cols = valid_outputs(w, wo, kw, g);
            for (std::size_t oh = 0; oh < ho; ++oh) {
              const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) - static_cast<std::ptrdiff_t>(g.padding);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
              T* dst = plane + oh * wo;
              const T* row = src + static_cast<std::size_t>(ih) * w;
              const std::size_t s = g.stride, shift = kw, pad = g.padding;
              if (s == 1) {
                for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) dst[ow] += wv * row[ow + shift - pad];
              } else {
                for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) dst[ow] += wv * row[ow * s + shift - pad];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_output,
                               Conv2dGeometry g) {
  const std::size_t n_batch = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t c_out = weights.dim(0), kh_n = weights.dim(2), kw_n = weights.dim(3);
  const std::size_t ho = grad_output.dim(2), wo = grad_output.dim(3);
  if (grad_output.dim(0) != n_batch || grad_output.dim(1) != c_out || ho != conv_out_dim(h, kh_n, g) ||
      wo != conv_out_dim(w, kw_n, g)) {
    throw Error(ErrorCode::kShapeMismatch, "conv2d grad_output " + shape_string(grad_output.shape()));
  }

  Conv2dGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(weights.shape()), Tensor<T>({c_out})};
  std::vector<T> partial(wo);

  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t co = 0; co < c_out; ++co) {
      const T* gplane = &grad_output.at(n, co, 0, 0);
      T bias_sum = T{};
      for (std::size_t i = 0; i < ho * wo; ++i) bias_sum += gplane[i];
      grads.bias[co] += bias_sum;

      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const T* src = &input.at(n, ci, 0, 0);
        T* dsrc = &grads.input.at(n, ci, 0, 0);
        for (std::size_t kh = 0; kh < kh_n; ++kh) {
          for (std::size_t kw = 0; kw < kw_n; ++kw) {
            const T wv = weights.at(co, ci, kh, kw);
            const Range cols = valid_outputs(w, wo, kw, g);
            std::fill(partial.begin(), partial.end(), T{});
            for (std::size_t oh = 0; oh < ho; ++oh) {
              const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) - static_cast<std::ptrdiff_t>(g.padding);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
              const T* grow = gplane + oh * wo;
              const T* row = src + static_cast<std::size_t>(ih) * w;
              T* drow = dsrc + static_cast<std::size_t>(ih) * w;
              const std::size_t s = g.stride, shift = kw, pad = g.padding;
              if (s == 1) {
                for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) {
                  partial[ow] += grow[ow] * row[ow + shift - pad];
                  drow[ow + shift - pad] += wv * grow[ow];
                }
              } else {
                for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) {
                  partial[ow] += grow[ow] * row[ow * s + shift - pad];
                  drow[ow * s + shift - pad] += wv * grow[ow];
                }
              }
            }
            T acc = T{};
            for (std::size_t ow = 0; ow < wo; ++ow) acc += partial[ow];
            grads.weights.at(co, ci, kh, kw) += acc;
          }
        }
      }
    }
  }
  return grads;
}

template <typename T>
PoolResult<T> maxpool2d_forward(const Tensor<T>& input) {
  require_rank(input.shape(), 4, "maxpool2d input");
  const std::size_t n_batch = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t ho = h / 2, wo = w / 2;
  if (ho == 0 || wo == 0) throw Error(ErrorCode::kShapeMismatch, "maxpool2d input too small: " + shape_string(input.shape()));

  PoolResult<T> result{Tensor<T>({n_batch, c, ho, wo}), std::vector<std::size_t>(n_batch * c * ho * wo)};
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < n_batch * c; ++nc) {
    const std::size_t plane = nc * h * w;
    for (std::size_t oh = 0; oh < ho; ++oh) {
      for (std::size_t ow = 0; ow < wo; ++ow, ++o) {
        std::size_t best = plane + (2 * oh) * w + 2 * ow;
        const std::size_t candidates[3] = {best + 1, best + w, best + w + 1};
        for (std::size_t idx : candidates) {
          if (input[idx] > input[best]) best = idx;
        }
        result.output[o] = input[best];
        result.argmax[o] = best;
      }
    }
  }
  return result;
}

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_output, const std::vector<std::size_t>& argmax,
                             const Shape& input_shape) {
  if (argmax.size() != grad_output.size()) {
    throw Error(ErrorCode::kShapeMismatch, "maxpool2d argmax does not match grad_output");
  }
  Tensor<T> grad(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad[argmax[i]] += grad_output[i];
  return grad;
}

template <typename T>
Tensor<T> batchnorm2d_train_forward(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                                    double eps, BatchNormCache<T>& cache) {
  require_rank(input.shape(), 4, "batchnorm2d input");
  const std::size_t n_batch = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (gamma.size() != c || beta.size() != c) {
    throw Error(ErrorCode::kShapeMismatch, "batchnorm2d parameters do not match " + std::to_string(c) + " channels");
  }
  const std::size_t count = n_batch * hw;
  if (count < 2) {
    throw Error(ErrorCode::kDegenerateBatch, "batch statistics need N*H*W >= 2, got " + std::to_string(count));
  }

  cache.normalized = Tensor<T>(input.shape());
  cache.mean.assign(c, 0.0);
  cache.variance.assign(c, 0.0);
  cache.inv_std.assign(c, 0.0);
  Tensor<T> out(input.shape());

  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::size_t n = 0; n < n_batch; ++n) {
      const T* p = &input.at(n, ch, 0, 0);
      for (std::size_t i = 0; i < hw; ++i) sum += p[i];
    }
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (std::size_t n = 0; n < n_batch; ++n) {
      const T* p = &input.at(n, ch, 0, 0);
      for (std::size_t i = 0; i < hw; ++i) {
        const double d = p[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / static_cast<double>(count);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    cache.mean[ch] = mean;
    cache.variance[ch] = var;
    cache.inv_std[ch] = inv_std;

    const double g = gamma[ch], b = beta[ch];
    for (std::size_t n = 0; n < n_batch; ++n) {
      const T* p = &input.at(n, ch, 0, 0);
      T* xh = &cache.normalized.at(n, ch, 0, 0);
      T* o = &out.at(n, ch, 0, 0);
      for (std::size_t i = 0; i < hw; ++i) {
        const double normalized = (p[i] - mean) * inv_std;
        xh[i] = static_cast<T>(normalized);
        o[i] = static_cast<T>(g * normalized + b);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> batchnorm2d_eval_forward(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                                   const Tensor<T>& running_mean, const Tensor<T>& running_var, double eps) {
  require_rank(input.shape(), 4, "batchnorm2d input");
  const std::size_t n_batch = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (gamma.size() != c || running_mean.size() != c) {
    throw Error(ErrorCode::kShapeMismatch, "batchnorm2d parameters do not match " + std::to_string(c) + " channels");
  }
  Tensor<T> out(input.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double scale = gamma[ch] / std::sqrt(static_cast<double>(running_var[ch]) + eps);
    const double mean = running_mean[ch];
    const double shift = beta[ch];
    for (std::size_t n = 0; n < n_batch; ++n) {
      const T* p = &input.at(n, ch, 0, 0);
      T* o = &out.at(n, ch, 0, 0);
      for (std::size_t i = 0; i < hw; ++i) o[i] = static_cast<T>((p[i] - mean) * scale + shift);
    }
  }
  return out;
}

template <typename T>
BatchNormGrads<T> batchnorm2d_backward(const Tensor<T>& grad_output, const Tensor<T>& gamma,
                                       const BatchNormCache<T>& cache) {
  const Tensor<T>& xh = cache.normalized;
  if (grad_output.shape() != xh.shape()) {
    throw Error(ErrorCode::kShapeMismatch, "batchnorm2d grad_output " + shape_string(grad_output.shape()));
  }
  const std::size_t n_batch = xh.dim(0), c = xh.dim(1), hw = xh.dim(2) * xh.dim(3);
  const auto count = static_cast<double>(n_batch * hw);

  BatchNormGrads<T> grads{Tensor<T>(xh.shape()), Tensor<T>({c}), Tensor<T>({c})};
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t n = 0; n < n_batch; ++n) {
      const T* gp = &grad_output.at(n, ch, 0, 0);
      const T* xp = &xh.at(n, ch, 0, 0);
      for (std::size_t i = 0; i < hw; ++i) {
        sum_g += gp[i];
        sum_gx += static_cast<double>(gp[i]) * xp[i];
      }
    }
    grads.gamma[ch] = static_cast<T>(sum_gx);
    grads.beta[ch] = static_cast<T>(sum_g);

    const double k = gamma[ch] * cache.inv_std[ch] / count;
    for (std::size_t n = 0; n < n_batch; ++n) {
      const T* gp = &grad_output.at(n, ch, 0, 0);
      const T* xp = &xh.at(n, ch, 0, 0);
      T* dp = &grads.input.at(n, ch, 0, 0);
      for (std::size_t i = 0; i < hw; ++i) {
        dp[i] = static_cast<T>(k * (count * gp[i] - sum_g - xp[i] * sum_gx));
      }
    }
  }
  return grads;
}

template <typename T>
Tensor<T> elu_forward(const Tensor<T>& input, double alpha) {
  Tensor<T> out(input.shape());
  const auto a = static_cast<T>(alpha);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T x = input[i];
    out[i] = x > T{} ? x : a * std::expm1(x);
  }
  return out;
}

template <typename T>
Tensor<T> elu_backward(const Tensor<T>& input, const Tensor<T>& grad_output, double alpha) {
  Tensor<T> grad(input.shape());
  const auto a = static_cast<T>(alpha);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T x = input[i];
    grad[i] = grad_output[i] * (x > T{} ? T{1} : a * std::exp(x));
  }
  return grad;
}

template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& input, double rate, CounterRng& rng, std::vector<T>& mask) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::kInvalidArgument, "dropout rate must be in [0, 1)");
  mask.assign(input.size(), T{1});
  if (rate == 0.0) return input;
  const auto keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    mask[i] = rng.next_double() < rate ? T{} : keep_scale;
    out[i] = input[i] * mask[i];
  }
  return out;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_output, const std::vector<T>& mask) {
  Tensor<T> grad(grad_output.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = grad_output[i] * mask[i];
  return grad;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
  require_rank(input.shape(), 2, "dense input");
  require_rank(weights.shape(), 2, "dense weights");
  const std::size_t n_batch = input.dim(0), d_in = input.dim(1), k_out = weights.dim(1);
  if (weights.dim(0) != d_in || bias.size() != k_out) {
    throw Error(ErrorCode::kShapeMismatch, "dense weights " + shape_string(weights.shape()) + " vs input " +
                                               shape_string(input.shape()));
  }
  Tensor<T> out({n_batch, k_out});
  for (std::size_t n = 0; n < n_batch; ++n) {
    T* o = out.data() + n * k_out;
    std::copy(bias.data(), bias.data() + k_out, o);
    const T* x = input.data() + n * d_in;
    for (std::size_t d = 0; d < d_in; ++d) {
      const T xv = x[d];
      const T* wrow = weights.data() + d * k_out;
      for (std::size_t k = 0; k < k_out; ++k) o[k] += xv * wrow[k];
    }
  }
  return out;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_output) {
  const std::size_t n_batch = input.dim(0), d_in = input.dim(1), k_out = weights.dim(1);
  if (grad_output.shape() != Shape{n_batch, k_out}) {
    throw Error(ErrorCode::kShapeMismatch, "dense grad_output " + shape_string(grad_output.shape()));
  }
  DenseGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(weights.shape()), Tensor<T>({k_out})};
  for (std::size_t n = 0; n < n_batch; ++n) {
    const T* g = grad_output.data() + n * k_out;
    const T* x = input.data() + n * d_in;
    T* dx = grads.input.data() + n * d_in;
    for (std::size_t k = 0; k < k_out; ++k) grads.bias[k] += g[k];
    for (std::size_t d = 0; d < d_in; ++d) {
      const T xv = x[d];
      T* dw = grads.weights.data() + d * k_out;
      const T* wrow = weights.data() + d * k_out;
      T acc = T{};
      for (std::size_t k = 0; k < k_out; ++k) {
        dw[k] += xv * g[k];
        acc += wrow[k] * g[k];
      }
      dx[d] = acc;
    }
  }
  return grads;
}

template <typename T>
Tensor<T> softmax_forward(const Tensor<T>& logits) {
  require_rank(logits.shape(), 2, "softmax input");
  const std::size_t n_batch = logits.dim(0), k = logits.dim(1);
  if (k == 0) throw Error(ErrorCode::kShapeMismatch, "softmax needs at least one class");
  Tensor<T> probs(logits.shape());
  for (std::size_t n = 0; n < n_batch; ++n) {
    const T* z = logits.data() + n * k;
    T* p = probs.data() + n * k;
    const T peak = *std::max_element(z, z + k);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double e = std::exp(static_cast<double>(z[i]) - static_cast<double>(peak));
      p[i] = static_cast<T>(e);
      sum += e;
    }
    for (std::size_t i = 0; i < k; ++i) p[i] = static_cast<T>(p[i] / sum);
  }
  return probs;
}

template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& probs, const Tensor<T>& grad_output) {
  const std::size_t n_batch = probs.dim(0), k = probs.dim(1);
  Tensor<T> grad(probs.shape());
  for (std::size_t n = 0; n < n_batch; ++n) {
    const T* p = probs.data() + n * k;
    const T* g = grad_output.data() + n * k;
    double dot = 0.0;
    for (std::size_t i = 0; i < k; ++i) dot += static_cast<double>(p[i]) * g[i];
    for (std::size_t i = 0; i < k; ++i) grad.data()[n * k + i] = static_cast<T>(p[i] * (g[i] - dot));
  }
  return grad;
}

template <typename T>
Tensor<T> standardize_forward(const Tensor<T>& input, StandardizeCache<T>* cache) {
  if (input.rank() < 2) throw Error(ErrorCode::kShapeMismatch, "standardize expects a batch dimension");
  const std::size_t n_batch = input.dim(0);
  const std::size_t m = n_batch == 0 ? 0 : input.size() / n_batch;
  Tensor<T> out(input.shape());
  if (cache) {
    cache->inv_std.assign(n_batch, 0.0);
    cache->floored.assign(n_batch, false);
  }
  for (std::size_t n = 0; n < n_batch; ++n) {
    const T* x = input.data() + n * m;
    T* y = out.data() + n * m;
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) sum += x[i];
    const double mean = sum / static_cast<double>(m);
    double sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double d = x[i] - mean;
      sq += d * d;
    }
    double sd = std::sqrt(sq / static_cast<double>(m));
    const bool floored = sd < kMinStd;
    if (floored) sd = kMinStd;
    for (std::size_t i = 0; i < m; ++i) y[i] = static_cast<T>((x[i] - mean) / sd);
    if (cache) {
      cache->inv_std[n] = 1.0 / sd;
      cache->floored[n] = floored;
    }
  }
  if (cache) cache->normalized = out;
  return out;
}

template <typename T>
Tensor<T> standardize_backward(const Tensor<T>& grad_output, const StandardizeCache<T>& cache) {
  const Tensor<T>& y = cache.normalized;
  const std::size_t n_batch = y.dim(0);
  const std::size_t m = n_batch == 0 ? 0 : y.size() / n_batch;
  Tensor<T> grad(y.shape());
  for (std::size_t n = 0; n < n_batch; ++n) {
    const T* g = grad_output.data() + n * m;
    const T* yn = y.data() + n * m;
    double mean_g = 0.0, mean_gy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      mean_g += g[i];
      mean_gy += static_cast<double>(g[i]) * yn[i];
    }
    mean_g /= static_cast<double>(m);
    mean_gy /= static_cast<double>(m);
    if (cache.floored[n]) mean_gy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      grad.data()[n * m + i] = static_cast<T>(cache.inv_std[n] * (g[i] - mean_g - yn[i] * mean_gy));
    }
  }
  return grad;
}

#define SER_INSTANTIATE_OPS(T)                                                                              \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Conv2dGeometry);  \
  template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,              \
                                          Conv2dGeometry);                                                  \
  template PoolResult<T> maxpool2d_forward(const Tensor<T>&);                                               \
  template Tensor<T> maxpool2d_backward(const Tensor<T>&, const std::vector<std::size_t>&, const Shape&);   \
  template Tensor<T> batchnorm2d_train_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double, \
                                               BatchNormCache<T>&);                                         \
  template Tensor<T> batchnorm2d_eval_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                              const Tensor<T>&, const Tensor<T>&, double);                  \
  template BatchNormGrads<T> batchnorm2d_backward(const Tensor<T>&, const Tensor<T>&,                       \
                                                  const BatchNormCache<T>&);                                \
  template Tensor<T> elu_forward(const Tensor<T>&, double);                                                 \
  template Tensor<T> elu_backward(const Tensor<T>&, const Tensor<T>&, double);                              \
  template Tensor<T> dropout_forward(const Tensor<T>&, double, CounterRng&, std::vector<T>&);               \
  template Tensor<T> dropout_backward(const Tensor<T>&, const std::vector<T>&);                             \
  template Tensor<T> dense_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> softmax_forward(const Tensor<T>&);                                                     \
  template Tensor<T> softmax_backward(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> standardize_forward(const Tensor<T>&, StandardizeCache<T>*);                           \
  template Tensor<T> standardize_backward(const Tensor<T>&, const StandardizeCache<T>&);

SER_INSTANTIATE_OPS(float)
SER_INSTANTIATE_OPS(double)

#undef SER_INSTANTIATE_OPS

}  // namespace ser::nn
