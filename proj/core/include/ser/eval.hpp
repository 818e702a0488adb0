#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ser/dataset.hpp"
#include "ser/model.hpp"
#include "ser/tensor.hpp"

namespace ser::eval {

struct Misprediction {
  std::string source_id;
  data::ClassLabel actual;
  data::ClassLabel predicted;

  friend bool operator==(const Misprediction&, const Misprediction&) = default;
};

using ConfusionMatrix = std::array<std::array<std::size_t, data::kNumClasses>, data::kNumClasses>;

struct EvalReport {
  std::size_t n = 0;
  double top1_accuracy = 0.0;
  double top5_accuracy = 0.0;
  /// Accuracy once male/female are merged into the six emotions.
  double emotion_accuracy = 0.0;
  ConfusionMatrix confusion{};  // rows actual, columns predicted
  std::vector<Misprediction> errors;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Builds a report from precomputed probability rows [N, 12]. source_ids and
/// actual run parallel to the rows. Argmax ties go to the lowest class index.
EvalReport evaluate_probabilities(const Tensor<float>& probs, std::span<const std::string> source_ids,
                                  std::span<const data::ClassLabel> actual);

/// One eval-mode prediction per example. Shape errors carry the example's source_id.
EvalReport evaluate(const model::SerModel& model, std::span<const data::LabeledExample> test_set);

/// Plain-text report: summary metrics, confusion matrix, and a numbered
/// "actual -> predicted" misprediction list.
std::string format_report(const EvalReport& report);

/// The same fields as JSON.
std::string report_to_json(const EvalReport& report);

}  // namespace ser::eval
