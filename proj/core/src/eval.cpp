#include "ser/eval.hpp"

#include <cstdio>

#include "json.hpp"
#include "ser/error.hpp"
#include "ser/optim.hpp"

namespace ser::eval {
namespace {

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * fraction);
  return buf;
}

std::string pad(std::string s, std::size_t width, bool left_align) {
  if (s.size() >= width) return s;
  return left_align ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

// "M-neu", "F-dis": short column headings for the confusion matrix.
std::string short_name(const data::ClassLabel& label) {
  return std::string(label.gender() == data::Gender::kFemale ? "F-" : "M-") +
         std::string(data::to_string(label.emotion()).substr(0, 3));
}

}  // namespace

EvalReport evaluate_probabilities(const Tensor<float>& probs, std::span<const std::string> source_ids,
                                  std::span<const data::ClassLabel> actual) {
  if (probs.rank() != 2 || probs.dim(1) != data::kNumClasses) {
    throw Error(ErrorCode::kShapeMismatch, "expected [N,12] probabilities, got " + shape_string(probs.shape()));
  }
  const std::size_t n = probs.dim(0);
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "cannot evaluate an empty test set");
  if (source_ids.size() != n || actual.size() != n) {
    throw Error(ErrorCode::kShapeMismatch, "labels and ids must match the probability rows");
  }

  std::vector<std::size_t> targets;
  targets.reserve(n);
  for (const auto& a : actual) targets.push_back(a.index());

  EvalReport report;
  report.n = n;
  report.top1_accuracy = optim::categorical_accuracy(probs, targets);
  report.top5_accuracy = optim::topk_accuracy(probs, targets, 5);
  std::size_t emotion_hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = probs.values().subspan(i * data::kNumClasses, data::kNumClasses);
    const auto predicted = data::ClassLabel::from_index(optim::top_k_indices(row, 1).front());
    ++report.confusion[targets[i]][predicted.index()];
    emotion_hits += predicted.emotion() == actual[i].emotion();
    if (predicted != actual[i]) report.errors.push_back({source_ids[i], actual[i], predicted});
  }
  report.emotion_accuracy = static_cast<double>(emotion_hits) / static_cast<double>(n);
  return report;
}

EvalReport evaluate(const model::SerModel& model, std::span<const data::LabeledExample> test_set) {
  if (test_set.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot evaluate an empty test set");
  const auto& in = model.input_shape();
  for (const auto& ex : test_set) {
    if (ex.features.n_mels != in[1] || ex.features.n_frames != in[2]) {
      throw Error(ErrorCode::kShapeMismatch, ex.source_id + ": features are " + std::to_string(ex.features.n_mels) +
                                                 "x" + std::to_string(ex.features.n_frames) + ", model expects " +
                                                 std::to_string(in[1]) + "x" + std::to_string(in[2]));
    }
  }
  std::vector<std::string> ids;
  std::vector<data::ClassLabel> actual;
  for (const auto& ex : test_set) {
    ids.push_back(ex.source_id);
    actual.push_back(ex.label);
  }
  return evaluate_probabilities(optim::predict_batch(model, test_set), ids, actual);
}

std::string format_report(const EvalReport& report) {
  const auto labels = data::all_class_labels();
  std::size_t top1_hits = 0;
  for (std::size_t i = 0; i < data::kNumClasses; ++i) top1_hits += report.confusion[i][i];

  std::string out;
  out += "examples: " + std::to_string(report.n) + "\n";
  out += "top-1 accuracy: " + percent(report.top1_accuracy) + " (" + std::to_string(top1_hits) + "/" +
         std::to_string(report.n) + ")\n";
  out += "top-5 accuracy: " + percent(report.top5_accuracy) + "\n";
  out += "emotion accuracy, genders merged: " + percent(report.emotion_accuracy) + "\n";

  out += "\nconfusion matrix (rows actual, columns predicted)\n";
  out += pad("", 16, true);
  for (const auto& l : labels) out += pad(short_name(l), 6, false);
  out += pad("total", 7, false) + "\n";
  for (std::size_t i = 0; i < data::kNumClasses; ++i) {
    out += pad(labels[i].name(), 16, true);
    std::size_t total = 0;
    for (std::size_t j = 0; j < data::kNumClasses; ++j) {
      out += pad(std::to_string(report.confusion[i][j]), 6, false);
      total += report.confusion[i][j];
    }
    out += pad(std::to_string(total), 7, false) + "\n";
  }

  const std::size_t e = report.errors.size();
  out += "\n" + std::to_string(e) + (e == 1 ? " error\n" : " errors\n");
  for (std::size_t i = 0; i < e; ++i) {
    const auto& m = report.errors[i];
    out += std::to_string(i + 1) + ". " + m.source_id + ": " + m.actual.name() + " -> " + m.predicted.name() + "\n";
  }
  return out;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["n"] = report.n;
  j["top1_accuracy"] = report.top1_accuracy;
  j["top5_accuracy"] = report.top5_accuracy;
  j["emotion_accuracy"] = report.emotion_accuracy;
  nlohmann::ordered_json labels = nlohmann::ordered_json::array();
  for (const auto& l : data::all_class_labels()) labels.push_back(l.name());
  j["class_labels"] = labels;
  j["confusion"] = report.confusion;
  nlohmann::ordered_json errors = nlohmann::ordered_json::array();
  for (const auto& m : report.errors) {
    errors.push_back({{"source_id", m.source_id}, {"actual", m.actual.name()}, {"predicted", m.predicted.name()}});
  }
  j["errors"] = errors;
  return j.dump(2) + "\n";
}

}  // namespace ser::eval
