#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "ser/error.hpp"
#include "ser/optim.hpp"
#include "ser/rng.hpp"

namespace ser::optim {
namespace {

Tensor<float> gather_batch(std::span<const data::LabeledExample> examples, std::span<const std::size_t> order,
                           std::vector<std::size_t>& targets) {
  std::vector<const dsp::MelSpectrogram*> features;
  features.reserve(order.size());
  targets.clear();
  for (std::size_t i : order) {
    features.push_back(&examples[i].features);
    targets.push_back(examples[i].label.index());
  }
  return model::features_to_batch(features);
}

std::string where(std::size_t epoch, std::size_t batch) {
  return "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void TrainingConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::kInvalidArgument, "epochs must be at least 1");
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch size must be at least 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::kInvalidArgument, "learning rate must be finite and >= 0");
}

std::string format_history(const TrainingHistory& history) {
  const bool has_val = std::any_of(history.epochs.begin(), history.epochs.end(),
                                   [](const EpochRecord& r) { return r.val_accuracy.has_value(); });
  std::string out = has_val ? "epoch\ttrain_loss\ttrain_acc\tval_acc\n" : "epoch\ttrain_loss\ttrain_acc\n";
  for (const auto& r : history.epochs) {
    out += std::to_string(r.epoch) + '\t' + fixed(r.train_loss, 6) + '\t' + fixed(r.train_accuracy, 6);
    if (has_val) out += '\t' + (r.val_accuracy ? fixed(*r.val_accuracy, 6) : std::string("-"));
    out += '\n';
  }
  return out;
}

void write_history(const std::string& path, const TrainingHistory& history) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out << format_history(history);
  if (!out) throw Error(ErrorCode::kIoError, "short write to " + path);
}

Tensor<float> predict_batch(const model::SerModel& model, std::span<const data::LabeledExample> examples,
                            std::size_t batch_size) {
  if (examples.empty()) throw Error(ErrorCode::kInvalidArgument, "nothing to predict");
  batch_size = std::max<std::size_t>(batch_size, 1);
  Tensor<float> probs({examples.size(), data::kNumClasses});
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> targets;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, examples.size() - start);
    Tensor<float> batch;
    try {
      batch = gather_batch(examples, std::span(order).subspan(start, count), targets);
    } catch (const Error& e) {
      throw Error(e.code(), examples[start].source_id + ": " + e.what());
    }
    const Tensor<float> p = model.infer(batch);
    std::copy(p.values().begin(), p.values().end(), probs.data() + start * data::kNumClasses);
  }
  return probs;
}

TrainingHistory train(model::SerModel& model, std::span<const data::LabeledExample> train_set,
                      const TrainingConfig& config, const TrainingHooks& hooks) {
  config.validate();
  if (train_set.empty()) throw Error(ErrorCode::kInvalidArgument, "training set is empty");

  AdamState<float> adam(AdamHyper{.lr = config.lr});
  CounterRng dropout_rng(config.seed, "dropout");
  nn::TrainContext ctx{dropout_rng};
  auto params = model.parameters();

  std::vector<std::size_t> order(train_set.size());
  std::vector<std::size_t> targets;
  TrainingHistory history;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (config.shuffle) {
      CounterRng rng(config.seed, "shuffle:" + std::to_string(epoch));
      shuffle(std::span(order), rng);
    }

    double loss_sum = 0.0, correct = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      const Tensor<float> batch = gather_batch(train_set, std::span(order).subspan(start, count), targets);

      Tensor<float> probs;
      try {
        probs = model.forward_train(batch, ctx);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNonFinite) throw;
        throw Error(ErrorCode::kNonFiniteLoss, where(epoch, batch_index + 1) + ": " + e.what());
      }
      const double loss = cross_entropy(probs, targets);
      if (!std::isfinite(loss)) throw Error(ErrorCode::kNonFiniteLoss, where(epoch, batch_index + 1) + ": loss is not finite");
      loss_sum += loss * static_cast<double>(count);
      correct += categorical_accuracy(probs, targets) * static_cast<double>(count);

      model.backward_from_logits(softmax_cross_entropy_grad(probs, targets));
      for (const auto* p : params) {
        if (!p->grad.all_finite()) {
          throw Error(ErrorCode::kNonFiniteLoss, where(epoch, batch_index + 1) + ": gradient of '" + p->name +
                                                     "' is not finite");
        }
      }
      adam.step(params);
    }

    EpochRecord record{.epoch = epoch,
                       .train_loss = loss_sum / static_cast<double>(order.size()),
                       .train_accuracy = correct / static_cast<double>(order.size()),
                       .val_accuracy = std::nullopt};
    if (!hooks.validation.empty()) {
      std::vector<std::size_t> val_targets;
      for (const auto& ex : hooks.validation) val_targets.push_back(ex.label.index());
      record.val_accuracy = categorical_accuracy(predict_batch(model, hooks.validation), val_targets);
    }
    history.epochs.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);
  }
  return history;
}

}  // namespace ser::optim
