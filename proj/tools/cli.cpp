#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ser/audio_io.hpp"
#include "ser/dataset.hpp"
#include "ser/dsp.hpp"
#include "ser/error.hpp"
#include "ser/eval.hpp"
#include "ser/model.hpp"
#include "ser/optim.hpp"
#include "ser/service.hpp"

namespace ser::cli {
namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kDefaultSeed = 42;

struct PrepareArgs {
  std::string data_dir;
  std::string out;
  std::uint64_t seed = kDefaultSeed;
  std::size_t test_size = data::kDefaultTestSize;
  std::string cache_dir;
};

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::size_t epochs = 125;
  std::size_t batch = 16;
  std::uint64_t seed = kDefaultSeed;
  double lr = 1e-3;
  std::string history;
  std::string cache_dir;
};

struct EvaluateArgs {
  std::string model;
  std::string manifest;
  std::string report;
  std::string split = "test";
  std::string cache_dir;
};

struct PredictArgs {
  std::string model;
  std::string wav;
  std::size_t top = 5;
};

struct ServeArgs {
  std::string model;
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string ui_dir;
  std::size_t max_upload = service::kDefaultMaxUploadBytes;
};

std::string cache_path(const std::string& cache_dir, const std::string& wav_path) {
  return (fs::path(cache_dir) / fs::path(wav_path).filename().replace_extension(".serf")).string();
}

std::string percent(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.2f%%", 100.0 * p);
  return buf;
}

std::vector<data::LabeledExample> load_split(const std::string& manifest, const std::string& split,
                                             const std::string& cache_dir, std::ostream& err) {
  std::vector<data::LabeledExample> out;
  std::size_t cached = 0;
  for (const auto& r : data::read_manifest(manifest)) {
    if (r.split != split) continue;
    data::LabeledExample ex;
    const std::string cp = cache_dir.empty() ? std::string() : cache_path(cache_dir, r.path);
    if (!cp.empty() && fs::exists(cp)) {
      ex.features = dsp::read_feature_cache(cp);
      ++cached;
    } else {
      ex.features = dsp::extract_features(audio::read_wav_file(r.path));
    }
    ex.label = data::ClassLabel::from_index(r.class_index);
    ex.actor_id = r.actor_id;
    ex.source_id = r.path;
    out.push_back(std::move(ex));
  }
  if (out.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "manifest " + manifest + " has no '" + split + "' records");
  }
  err << "loaded " << out.size() << " " << split << " examples";
  if (cached) err << " (" << cached << " from cache)";
  err << "\n";
  return out;
}

int run_prepare(const PrepareArgs& a, std::ostream& out, std::ostream& err) {
  const auto build = data::build_dataset(a.data_dir);
  for (const auto& s : build.skipped) err << "skipped " << s.path << ": " << s.reason << "\n";
  const auto split = data::split_train_test(std::span<const data::LabeledExample>(build.examples), a.seed, a.test_size);

  std::vector<data::ManifestRecord> records;
  std::vector<bool> is_test(build.examples.size(), false);
  for (std::size_t i : split.test) is_test[i] = true;
  for (std::size_t i = 0; i < build.examples.size(); ++i) {
    const auto& ex = build.examples[i];
    records.push_back({fs::absolute(ex.source_id).lexically_normal().string(), ex.label.index(), ex.actor_id,
                       is_test[i] ? "test" : "train"});
  }
  data::write_manifest(a.out, records);

  if (!a.cache_dir.empty()) {
    fs::create_directories(a.cache_dir);
    for (std::size_t i = 0; i < build.examples.size(); ++i) {
      dsp::write_feature_cache(cache_path(a.cache_dir, records[i].path), build.examples[i].features);
    }
  }
  out << "examples: " << build.examples.size() << " (train " << split.train.size() << ", test " << split.test.size()
      << ")\n"
      << "filtered out: " << build.filtered_out << "\n"
      << "skipped: " << build.skipped.size() << "\n"
      << "manifest: " << a.out << "\n";
  return 0;
}

int run_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  optim::TrainingConfig config{.epochs = a.epochs, .batch_size = a.batch, .seed = a.seed, .lr = a.lr};
  config.validate();
  const auto train_set = load_split(a.manifest, "train", a.cache_dir, err);

  model::SerModel model = model::build_ser_model(a.seed);
  optim::TrainingHooks hooks;
  hooks.on_epoch = [&err, total = a.epochs](const optim::EpochRecord& r) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "epoch %zu/%zu  loss %.4f  acc %.4f\n", r.epoch, total, r.train_loss,
                  r.train_accuracy);
    err << buf << std::flush;
  };
  const auto history = optim::train(model, train_set, config, hooks);
  model::save_model(model, a.out);
  if (!a.history.empty()) optim::write_history(a.history, history);

  const auto& last = history.epochs.back();
  char fp[16];
  std::snprintf(fp, sizeof fp, "%08x", model::model_fingerprint(model));
  out << "model: " << a.out << "\n"
      << "fingerprint: " << fp << "\n"
      << "final train loss: " << last.train_loss << "\n"
      << "final train accuracy: " << last.train_accuracy << "\n";
  return 0;
}

int run_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const model::SerModel model = model::load_model(a.model);
  const auto test_set = load_split(a.manifest, a.split, a.cache_dir, err);
  const auto report = eval::evaluate(model, test_set);
  const std::string text = eval::format_report(report);

  std::ofstream txt(a.report);
  if (!txt) throw Error(ErrorCode::kIoError, "cannot write " + a.report);
  txt << text;
  std::ofstream json(a.report + ".json");
  if (!json) throw Error(ErrorCode::kIoError, "cannot write " + a.report + ".json");
  json << eval::report_to_json(report);
  out << text;
  return 0;
}

int run_predict(const PredictArgs& a, std::ostream& out, std::ostream&) {
  const model::SerModel model = model::load_model(a.model);
  const auto features = dsp::extract_features(audio::read_wav_file(a.wav));
  const auto result = model::predict(model, features);
  const std::size_t k = std::min(a.top, result.ranked.size());
  for (std::size_t i = 0; i < k; ++i) {
    out << (i + 1) << ". " << percent(result.ranked[i].probability) << "  " << result.ranked[i].label.name() << "\n";
  }
  return 0;
}

int run_serve(const ServeArgs& a, std::ostream&, std::ostream& err) {
  service::ServiceConfig config;
  config.host = a.host;
  config.port = a.port;
  config.model_path = a.model;
  config.max_upload_bytes = a.max_upload;
  if (!a.ui_dir.empty()) config.static_asset_dir = a.ui_dir;
  return service::serve(config, err);
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Speech emotion recognition: features, training, evaluation and serving.", "ser"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", "ser 1.0.0");
  app.failure_message(CLI::FailureMessage::help);

  PrepareArgs prepare;
  auto* p = app.add_subcommand("prepare", "Build the dataset and write a train/test manifest");
  p->add_option("--data-dir", prepare.data_dir, "Directory searched recursively for RAVDESS .wav files")
      ->required()
      ->check(CLI::ExistingDirectory);
  p->add_option("--out", prepare.out, "Manifest file to write")->required();
  p->add_option("--seed", prepare.seed, "Seed for the test-set draw");
  p->add_option("--test-size", prepare.test_size, "Number of held-out test examples")->check(CLI::PositiveNumber);
  p->add_option("--cache-dir", prepare.cache_dir, "Write extracted features here for reuse");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model on the manifest's train split");
  t->add_option("--manifest", train.manifest, "Manifest written by prepare")->required()->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "Model file to write")->required();
  t->add_option("--epochs", train.epochs, "Training epochs")->check(CLI::PositiveNumber);
  t->add_option("--batch", train.batch, "Batch size")->check(CLI::PositiveNumber);
  t->add_option("--seed", train.seed, "Seed for initialization, shuffling and dropout");
  t->add_option("--lr", train.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
  t->add_option("--history", train.history, "Write per-epoch loss and accuracy to this file");
  t->add_option("--cache-dir", train.cache_dir, "Read features from this cache when present");

  EvaluateArgs evaluate;
  auto* e = app.add_subcommand("evaluate", "Score a model on a manifest split");
  e->add_option("--model", evaluate.model, "Model file")->required()->check(CLI::ExistingFile);
  e->add_option("--manifest", evaluate.manifest, "Manifest written by prepare")->required()->check(CLI::ExistingFile);
  e->add_option("--report", evaluate.report, "Text report to write; JSON goes to <report>.json")->required();
  e->add_option("--split", evaluate.split, "Split to score")->check(CLI::IsMember({"train", "test"}));
  e->add_option("--cache-dir", evaluate.cache_dir, "Read features from this cache when present");

  PredictArgs predict;
  auto* d = app.add_subcommand("predict", "Rank the 12 classes for one WAV file");
  d->add_option("--model", predict.model, "Model file")->required()->check(CLI::ExistingFile);
  d->add_option("--wav", predict.wav, "WAV file (PCM16 or float32)")->required()->check(CLI::ExistingFile);
  d->add_option("--top", predict.top, "Number of classes to print")->check(CLI::Range(1, 12));

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Serve the HTTP prediction API and the UI");
  s->add_option("--model", serve.model, "Model file")->required()->check(CLI::ExistingFile);
  s->add_option("--host", serve.host, "Address to bind");
  s->add_option("--port", serve.port, "Port to bind, 0 for any free port")->check(CLI::Range(0, 65535));
  s->add_option("--ui-dir", serve.ui_dir, "Directory of built UI assets served at /");
  s->add_option("--max-upload", serve.max_upload, "Largest accepted upload in bytes")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    // Top-level help lists every subcommand's flags too.
    if (app.get_subcommands().empty()) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    }
    return app.exit(ex, out, err);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, out, err);
    return 1;
  }

  try {
    if (p->parsed()) return run_prepare(prepare, out, err);
    if (t->parsed()) return run_train(train, out, err);
    if (e->parsed()) return run_evaluate(evaluate, out, err);
    if (d->parsed()) return run_predict(predict, out, err);
    if (s->parsed()) return run_serve(serve, out, err);
  } catch (const Error& ex) {
    err << "ser: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    err << "ser: " << ex.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace ser::cli
