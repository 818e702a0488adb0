#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ser/dataset.hpp"
#include "ser/model.hpp"
#include "ser/tensor.hpp"

namespace ser::optim {

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean negative log-probability of each row's target; probabilities are
/// floored at 1e-12 before the log. Throws kInvalidTarget for an index
/// outside 0..K-1 and kShapeMismatch for a target count that is not N.
template <typename T>
double cross_entropy(const Tensor<T>& probs, std::span<const std::size_t> targets);

/// Gradient of cross_entropy(softmax(logits)) with respect to the logits,
/// given the softmax output: (probs - onehot) / N.
template <typename T>
Tensor<T> softmax_cross_entropy_grad(const Tensor<T>& probs, std::span<const std::size_t> targets);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moments for one parameter tensor. The update arithmetic runs in double and
/// the moments are stored at the parameter's precision.
template <typename T>
struct AdamMoments {
  Tensor<T> m;
  Tensor<T> v;
};

template <typename T>
class AdamState {
 public:
  explicit AdamState(AdamHyper hyper = {}) : hyper_(hyper) {}

  const AdamHyper& hyper() const noexcept { return hyper_; }
  std::uint64_t step_count() const noexcept { return t_; }
  const std::vector<AdamMoments<T>>& moments() const noexcept { return moments_; }

  /// One update over every parameter: t += 1, then per element
  /// m = b1 m + (1-b1) g, v = b2 v + (1-b2) g^2,
  /// theta -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
  /// Moments are created lazily on the first step. Throws kShapeMismatch when
  /// the parameter list changes shape between steps or a grad does not match
  /// its value.
  void step(std::span<nn::Parameter<T>* const> params);

 private:
  AdamHyper hyper_;
  std::uint64_t t_ = 0;
  std::vector<AdamMoments<T>> moments_;
};

/// Fraction of rows whose argmax (lowest index on ties) equals the target.
template <typename T>
double categorical_accuracy(const Tensor<T>& probs, std::span<const std::size_t> targets);

/// Fraction of rows whose target is among the k largest entries, ties ranked
/// toward the lower index. Throws kInvalidArgument unless 1 <= k <= K.
template <typename T>
double topk_accuracy(const Tensor<T>& probs, std::span<const std::size_t> targets, std::size_t k);

/// Indices of row's k largest values, descending, lower index first on ties.
std::vector<std::size_t> top_k_indices(std::span<const float> row, std::size_t k);

struct TrainingConfig {
  std::size_t epochs = 125;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  double lr = 1e-3;
  bool shuffle = true;

  /// Throws kInvalidArgument unless epochs >= 1, batch_size >= 1 and lr >= 0.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> val_accuracy;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;

  friend bool operator==(const TrainingHistory&, const TrainingHistory&) = default;
};

/// Tab-separated, one header line then one line per epoch:
/// epoch, train_loss, train_acc[, val_acc].
std::string format_history(const TrainingHistory& history);
void write_history(const std::string& path, const TrainingHistory& history);

struct TrainingHooks {
  /// Optional held-out set scored in eval mode after every epoch.
  std::span<const data::LabeledExample> validation;
  /// Called after each epoch with the record just appended.
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Trains model in place. Each epoch shuffles the example order with
/// CounterRng(seed, "shuffle:<epoch>") (identity order when shuffle is off),
/// walks batches of batch_size (the short final batch is kept), and applies
/// one Adam step per batch. Dropout draws come from CounterRng(seed, "dropout").
/// Loss and accuracy per epoch are example-weighted means of the train-mode
/// batches. Throws kInvalidArgument for an empty set or bad config,
/// kNonFiniteLoss naming epoch and batch when a loss or gradient is not finite.
TrainingHistory train(model::SerModel& model, std::span<const data::LabeledExample> train_set,
                      const TrainingConfig& config, const TrainingHooks& hooks = {});

/// Eval-mode probabilities [N, 12] for a set of examples, batched.
Tensor<float> predict_batch(const model::SerModel& model, std::span<const data::LabeledExample> examples,
                            std::size_t batch_size = 32);

extern template class AdamState<float>;
extern template class AdamState<double>;

}  // namespace ser::optim
