#include "oracles.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "ser/nn/layers.hpp"
#include "ser/optim.hpp"
#include "test_util.hpp"

namespace ser::testing {

Tensor<double> conv2d_reference(const Tensor<double>& input, const Tensor<double>& weights,
                                const Tensor<double>& bias, nn::Conv2dGeometry g) {
  const std::size_t n_batch = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t c_out = weights.dim(0), kh_n = weights.dim(2), kw_n = weights.dim(3);
  const std::size_t ho = (h + 2 * g.padding - kh_n) / g.stride + 1;
  const std::size_t wo = (w + 2 * g.padding - kw_n) / g.stride + 1;
  Tensor<double> out({n_batch, c_out, ho, wo});
  for (std::size_t n = 0; n < n_batch; ++n)
    for (std::size_t co = 0; co < c_out; ++co)
      for (std::size_t oh = 0; oh < ho; ++oh)
        for (std::size_t ow = 0; ow < wo; ++ow) {
          double acc = bias[co];
          for (std::size_t ci = 0; ci < c_in; ++ci)
            for (std::size_t kh = 0; kh < kh_n; ++kh)
              for (std::size_t kw = 0; kw < kw_n; ++kw) {
                const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.padding);
                const long iw = static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.padding);
                if (ih < 0 || iw < 0 || ih >= static_cast<long>(h) || iw >= static_cast<long>(w)) continue;
                acc += weights.at(co, ci, kh, kw) *
                       input.at(n, ci, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw));
              }
          out.at(n, co, oh, ow) = acc;
        }
  return out;
}

std::vector<std::complex<double>> dft_reference(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    out[k] = acc;
  }
  return out;
}

std::vector<double> numeric_gradient(Tensor<double>& x, const std::function<double()>& f, double h) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

namespace {

std::vector<double> as_vector(const Tensor<double>& t) { return {t.values().begin(), t.values().end()}; }

// Scalar probe loss sum(out * probe) so the upstream gradient is the probe itself.
double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::size_t pick(CounterRng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

}  // namespace

ConvOracleCase conv2d_oracle_case(std::uint64_t seed) {
  CounterRng rng(seed, "conv-oracle");
  ConvOracleCase c;
  const std::size_t k = pick(rng, 1, 5);
  c.geometry.stride = pick(rng, 1, 3);
  c.geometry.padding = pick(rng, 0, 2);
  const std::size_t h = pick(rng, k, k + 9);
  const std::size_t w = pick(rng, k, k + 9);
  c.input_shape = {pick(rng, 1, 3), pick(rng, 1, 4), h, w};
  c.weight_shape = {pick(rng, 1, 5), c.input_shape[1], k, k};
  const auto input = random_tensor<double>(c.input_shape, rng);
  const auto weights = random_tensor<double>(c.weight_shape, rng);
  const auto bias = random_tensor<double>({c.weight_shape[0]}, rng);
  const auto got = nn::conv2d_forward(input, weights, bias, c.geometry);
  const auto want = conv2d_reference(input, weights, bias, c.geometry);
  if (got.shape() != want.shape()) {
    c.max_abs_error = std::numeric_limits<double>::infinity();
    return c;
  }
  c.bit_exact = got == want;
  for (std::size_t i = 0; i < got.size(); ++i) c.max_abs_error = std::max(c.max_abs_error, std::abs(got[i] - want[i]));
  return c;
}

double conv2d_gradcheck(std::uint64_t seed) {
  CounterRng rng(seed, "gradcheck:conv2d");
  const std::size_t n = pick(rng, 1, 2), ci = pick(rng, 1, 3), co = pick(rng, 1, 3);
  const std::size_t k = pick(rng, 1, 3);
  const nn::Conv2dGeometry g{pick(rng, 1, 2), pick(rng, 0, 1)};
  const std::size_t h = pick(rng, k, 6), w = pick(rng, k, 6);
  auto x = random_tensor<double>({n, ci, h, w}, rng);
  auto wt = random_tensor<double>({co, ci, k, k}, rng);
  auto b = random_tensor<double>({co}, rng);
  const auto probe = random_tensor<double>(nn::conv2d_forward(x, wt, b, g).shape(), rng);
  auto f = [&] { return dot(nn::conv2d_forward(x, wt, b, g), probe); };
  const auto grads = nn::conv2d_backward(x, wt, probe, g);
  return std::max({relative_error(as_vector(grads.input), numeric_gradient(x, f)),
                   relative_error(as_vector(grads.weights), numeric_gradient(wt, f)),
                   relative_error(as_vector(grads.bias), numeric_gradient(b, f))});
}

double dense_gradcheck(std::uint64_t seed) {
  CounterRng rng(seed, "gradcheck:dense");
  const std::size_t n = pick(rng, 1, 4), d = pick(rng, 1, 7), k = pick(rng, 1, 5);
  auto x = random_tensor<double>({n, d}, rng);
  auto wt = random_tensor<double>({d, k}, rng);
  auto b = random_tensor<double>({k}, rng);
  const auto probe = random_tensor<double>({n, k}, rng);
  auto f = [&] { return dot(nn::dense_forward(x, wt, b), probe); };
  const auto grads = nn::dense_backward(x, wt, probe);
  return std::max({relative_error(as_vector(grads.input), numeric_gradient(x, f)),
                   relative_error(as_vector(grads.weights), numeric_gradient(wt, f)),
                   relative_error(as_vector(grads.bias), numeric_gradient(b, f))});
}

double batchnorm2d_gradcheck(std::uint64_t seed) {
  CounterRng rng(seed, "gradcheck:batchnorm2d");
  const std::size_t n = pick(rng, 2, 3), c = pick(rng, 1, 3), h = pick(rng, 1, 3), w = pick(rng, 2, 4);
  auto x = random_tensor<double>({n, c, h, w}, rng, -2.0, 2.0);
  auto gamma = random_tensor<double>({c}, rng, 0.5, 1.5);
  auto beta = random_tensor<double>({c}, rng);
  const auto probe = random_tensor<double>(x.shape(), rng);
  const double eps = 1e-5;
  auto f = [&] {
    nn::BatchNormCache<double> scratch;
    return dot(nn::batchnorm2d_train_forward(x, gamma, beta, eps, scratch), probe);
  };
  nn::BatchNormCache<double> cache;
  nn::batchnorm2d_train_forward(x, gamma, beta, eps, cache);
  const auto grads = nn::batchnorm2d_backward(probe, gamma, cache);
  return std::max({relative_error(as_vector(grads.input), numeric_gradient(x, f)),
                   relative_error(as_vector(grads.gamma), numeric_gradient(gamma, f)),
                   relative_error(as_vector(grads.beta), numeric_gradient(beta, f))});
}

double elu_gradcheck(std::uint64_t seed) {
  CounterRng rng(seed, "gradcheck:elu");
  auto x = random_tensor<double>({pick(rng, 1, 3), pick(rng, 1, 2), 3, pick(rng, 2, 5)}, rng, -3.0, 3.0);
  // Keep clear of the kink at 0, where the two one-sided slopes differ.
  for (double& v : x.values()) {
    if (std::abs(v) < 1e-3) v = 0.5;
  }
  const double alpha = 1.0;
  const auto probe = random_tensor<double>(x.shape(), rng);
  auto f = [&] { return dot(nn::elu_forward(x, alpha), probe); };
  return relative_error(as_vector(nn::elu_backward(x, probe, alpha)), numeric_gradient(x, f));
}

double softmax_cross_entropy_gradcheck(std::uint64_t seed) {
  CounterRng rng(seed, "gradcheck:softmax_ce");
  const std::size_t n = pick(rng, 1, 6), k = pick(rng, 2, 12);
  auto logits = random_tensor<double>({n, k}, rng, -3.0, 3.0);
  std::vector<std::size_t> targets(n);
  for (auto& t : targets) t = static_cast<std::size_t>(rng.below(k));
  auto f = [&] { return optim::cross_entropy(nn::softmax_forward(logits), targets); };
  const auto analytic = optim::softmax_cross_entropy_grad(nn::softmax_forward(logits), targets);
  return relative_error(as_vector(analytic), numeric_gradient(logits, f));
}

double softmax_gradcheck(std::uint64_t seed) {
  CounterRng rng(seed, "gradcheck:softmax");
  const std::size_t n = pick(rng, 1, 4), k = pick(rng, 2, 8);
  auto logits = random_tensor<double>({n, k}, rng, -3.0, 3.0);
  const auto probe = random_tensor<double>({n, k}, rng);
  auto f = [&] { return dot(nn::softmax_forward(logits), probe); };
  const auto analytic = nn::softmax_backward(nn::softmax_forward(logits), probe);
  return relative_error(as_vector(analytic), numeric_gradient(logits, f));
}

double maxpool2d_gradcheck(std::uint64_t seed) {
  CounterRng rng(seed, "gradcheck:maxpool2d");
  auto x = random_tensor<double>({pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 2, 5), pick(rng, 2, 5)}, rng);
  const auto result = nn::maxpool2d_forward(x);
  const auto probe = random_tensor<double>(result.output.shape(), rng);
  auto f = [&] { return dot(nn::maxpool2d_forward(x).output, probe); };
  const auto analytic = nn::maxpool2d_backward(probe, result.argmax, x.shape());
  return relative_error(as_vector(analytic), numeric_gradient(x, f));
}

double standardize_gradcheck(std::uint64_t seed) {
  CounterRng rng(seed, "gradcheck:standardize");
  auto x = random_tensor<double>({pick(rng, 1, 3), 1, pick(rng, 2, 4), pick(rng, 2, 5)}, rng, -80.0, 0.0);
  const auto probe = random_tensor<double>(x.shape(), rng);
  auto f = [&] { return dot(nn::standardize_forward(x), probe); };
  nn::StandardizeCache<double> cache;
  nn::standardize_forward(x, &cache);
  return relative_error(as_vector(nn::standardize_backward(probe, cache)), numeric_gradient(x, f, 1e-5));
}

double layer_stack_gradcheck(std::uint64_t seed) {
  using nn::LayerKind;
  CounterRng rng(seed, "gradcheck:stack");
  std::vector<std::unique_ptr<nn::Layer<double>>> layers;
  for (const nn::LayerSpec& s : std::vector<nn::LayerSpec>{
           {.kind = LayerKind::kStandardize},
           {.kind = LayerKind::kConv2d, .in_features = 1, .out_features = 2, .kernel = 3, .stride = 1, .padding = 1},
           {.kind = LayerKind::kBatchNorm2d, .in_features = 2},
           {.kind = LayerKind::kElu},
           {.kind = LayerKind::kMaxPool2d, .kernel = 2, .stride = 2},
           {.kind = LayerKind::kDropout, .rate = 0.0},
           {.kind = LayerKind::kFlatten},
           {.kind = LayerKind::kDense, .in_features = 12, .out_features = 5},
           {.kind = LayerKind::kElu},
           {.kind = LayerKind::kDense, .in_features = 5, .out_features = 12},
           {.kind = LayerKind::kSoftmax}}) {
    layers.push_back(nn::make_layer<double>(s));
  }
  for (auto& l : layers) {
    for (auto* p : l->parameters()) {
      if (p->name == "weight") {
        for (double& v : p->value.values()) v = rng.uniform(-0.8, 0.8);
      } else if (p->name == "bias" || p->name == "beta") {
        for (double& v : p->value.values()) v = rng.uniform(-0.2, 0.2);
      } else {
        for (double& v : p->value.values()) v = rng.uniform(0.7, 1.3);
      }
    }
  }

  const std::size_t n = 3;
  auto x = random_tensor<double>({n, 1, 4, 6}, rng, -60.0, 0.0);
  std::vector<std::size_t> targets(n);
  for (auto& t : targets) t = static_cast<std::size_t>(rng.below(12));

  CounterRng dropout_rng(seed, "dropout");
  nn::TrainContext ctx{dropout_rng};
  auto forward = [&] {
    Tensor<double> a = x;
    for (auto& l : layers) a = l->forward(a, ctx);
    return a;
  };
  auto f = [&] { return optim::cross_entropy(forward(), targets); };

  Tensor<double> g = optim::softmax_cross_entropy_grad(forward(), targets);
  for (std::size_t i = layers.size() - 1; i-- > 0;) g = layers[i]->backward(g);

  std::vector<std::vector<double>> analytic;
  for (auto& l : layers) {
    for (auto* p : l->parameters()) analytic.push_back(as_vector(p->grad));
  }
  // A conv bias feeding batch norm has an exactly zero gradient (the batch
  // mean absorbs it); both sides are then rounding noise, so tiny gradients
  // are compared absolutely.
  auto compare = [](const std::vector<double>& a, const std::vector<double>& b) {
    double na = 0.0, nb = 0.0;
    for (double v : a) na += v * v;
    for (double v : b) nb += v * v;
    if (std::sqrt(std::max(na, nb)) < 1e-7) return 0.0;
    return relative_error(a, b);
  };
  double worst = compare(as_vector(g), numeric_gradient(x, f, 1e-5));
  std::size_t i = 0;
  for (auto& l : layers) {
    for (auto* p : l->parameters()) worst = std::max(worst, compare(analytic[i++], numeric_gradient(p->value, f)));
  }
  return worst;
}

}  // namespace ser::testing
