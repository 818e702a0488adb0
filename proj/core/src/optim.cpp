#include "ser/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ser/error.hpp"

namespace ser::optim {
namespace {

template <typename T>
void check_rows(const Tensor<T>& probs, std::span<const std::size_t> targets) {
  if (probs.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "expected [N,K] probabilities");
  if (targets.size() != probs.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch, std::to_string(targets.size()) + " targets for " +
                                               std::to_string(probs.dim(0)) + " rows");
  }
  for (std::size_t t : targets) {
    if (t >= probs.dim(1)) {
      throw Error(ErrorCode::kInvalidTarget,
                  "target " + std::to_string(t) + " outside 0.." + std::to_string(probs.dim(1) - 1));
    }
  }
}

template <typename T>
std::size_t argmax_row(const T* row, std::size_t k) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < k; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

}  // namespace

template <typename T>
double cross_entropy(const Tensor<T>& probs, std::span<const std::size_t> targets) {
  check_rows(probs, targets);
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  if (n == 0) throw Error(ErrorCode::kShapeMismatch, "cross_entropy of an empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::max(static_cast<double>(probs[i * k + targets[i]]), kProbabilityFloor);
    sum -= std::log(p);
  }
  return sum / static_cast<double>(n);
}

template <typename T>
Tensor<T> softmax_cross_entropy_grad(const Tensor<T>& probs, std::span<const std::size_t> targets) {
  check_rows(probs, targets);
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  Tensor<T> grad(probs.shape());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double onehot = j == targets[i] ? 1.0 : 0.0;
      grad[i * k + j] = static_cast<T>((static_cast<double>(probs[i * k + j]) - onehot) * inv_n);
    }
  }
  return grad;
}

template <typename T>
void AdamState<T>::step(std::span<nn::Parameter<T>* const> params) {
  if (moments_.empty()) {
    moments_.reserve(params.size());
    for (const auto* p : params) moments_.push_back({Tensor<T>(p->value.shape()), Tensor<T>(p->value.shape())});
  }
  if (moments_.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer was built for " + std::to_string(moments_.size()) +
                                               " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = *params[i];
    if (p.grad.shape() != p.value.shape() || moments_[i].m.shape() != p.value.shape()) {
      throw Error(ErrorCode::kShapeMismatch, "parameter '" + p.name + "' has value " + shape_string(p.value.shape()) +
                                                 " and grad " + shape_string(p.grad.shape()));
    }
  }

  ++t_;
  const double b1 = hyper_.beta1, b2 = hyper_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* theta = params[i]->value.data();
    const T* g = params[i]->grad.data();
    T* m = moments_[i].m.data();
    T* v = moments_[i].v.data();
    const std::size_t n = params[i]->value.size();
    for (std::size_t j = 0; j < n; ++j) {
      const double gj = g[j];
      const double mj = b1 * static_cast<double>(m[j]) + (1.0 - b1) * gj;
      const double vj = b2 * static_cast<double>(v[j]) + (1.0 - b2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = hyper_.lr * (mj / c1) / (std::sqrt(vj / c2) + hyper_.eps);
      theta[j] = static_cast<T>(static_cast<double>(theta[j]) - update);
    }
  }
}

template <typename T>
double categorical_accuracy(const Tensor<T>& probs, std::span<const std::size_t> targets) {
  check_rows(probs, targets);
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  if (n == 0) throw Error(ErrorCode::kShapeMismatch, "accuracy of an empty batch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) correct += argmax_row(probs.data() + i * k, k) == targets[i];
  return static_cast<double>(correct) / static_cast<double>(n);
}

template <typename T>
double topk_accuracy(const Tensor<T>& probs, std::span<const std::size_t> targets, std::size_t k) {
  check_rows(probs, targets);
  const std::size_t n = probs.dim(0), classes = probs.dim(1);
  if (k < 1 || k > classes) {
    throw Error(ErrorCode::kInvalidArgument, "k must be in 1.." + std::to_string(classes));
  }
  if (n == 0) throw Error(ErrorCode::kShapeMismatch, "accuracy of an empty batch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = probs.data() + i * classes;
    // Rank of the target: entries strictly above it, plus equal entries at lower indices.
    std::size_t rank = 0;
    const T target = row[targets[i]];
    for (std::size_t j = 0; j < classes; ++j) {
      if (row[j] > target || (row[j] == target && j < targets[i])) ++rank;
    }
    hits += rank < k;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::vector<std::size_t> top_k_indices(std::span<const float> row, std::size_t k) {
  std::vector<std::size_t> idx(row.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
  idx.resize(k);
  return idx;
}

template double cross_entropy<float>(const Tensor<float>&, std::span<const std::size_t>);
template double cross_entropy<double>(const Tensor<double>&, std::span<const std::size_t>);
template Tensor<float> softmax_cross_entropy_grad<float>(const Tensor<float>&, std::span<const std::size_t>);
template Tensor<double> softmax_cross_entropy_grad<double>(const Tensor<double>&, std::span<const std::size_t>);
template double categorical_accuracy<float>(const Tensor<float>&, std::span<const std::size_t>);
template double categorical_accuracy<double>(const Tensor<double>&, std::span<const std::size_t>);
template double topk_accuracy<float>(const Tensor<float>&, std::span<const std::size_t>, std::size_t);
template double topk_accuracy<double>(const Tensor<double>&, std::span<const std::size_t>, std::size_t);
template class AdamState<float>;
template class AdamState<double>;

}  // namespace ser::optim
