#include "ser/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include <zlib.h>

#include "json.hpp"
#include "ser/error.hpp"
#include "ser/rng.hpp"

namespace ser::model {
namespace {

using json = nlohmann::json;
using nn::LayerKind;
using nn::LayerSpec;

constexpr char kMagic[4] = {'S', 'E', 'R', 'M'};
constexpr std::size_t kPreambleBytes = 12;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; model files are far below 4 GiB.
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

json spec_to_json(const LayerSpec& s) {
  json j = {{"kind", std::string(nn::to_string(s.kind))}};
  switch (s.kind) {
    case LayerKind::kConv2d:
      j["in_channels"] = s.in_features;
      j["out_channels"] = s.out_features;
      j["kernel"] = s.kernel;
      j["stride"] = s.stride;
      j["padding"] = s.padding;
      break;
    case LayerKind::kBatchNorm2d:
      j["channels"] = s.in_features;
      j["eps"] = s.eps;
      j["momentum"] = s.momentum;
      break;
    case LayerKind::kElu: j["alpha"] = s.alpha; break;
    case LayerKind::kMaxPool2d:
      j["pool"] = s.kernel;
      j["stride"] = s.stride;
      break;
    case LayerKind::kDropout: j["rate"] = s.rate; break;
    case LayerKind::kDense:
      j["in_features"] = s.in_features;
      j["out_features"] = s.out_features;
      break;
    case LayerKind::kStandardize:
    case LayerKind::kFlatten:
    case LayerKind::kSoftmax: break;
  }
  return j;
}

LayerSpec spec_from_json(const json& j) {
  LayerSpec s;
  s.kind = nn::parse_layer_kind(j.at("kind").get<std::string>());
  switch (s.kind) {
    case LayerKind::kConv2d:
      s.in_features = j.at("in_channels").get<std::size_t>();
      s.out_features = j.at("out_channels").get<std::size_t>();
      s.kernel = j.at("kernel").get<std::size_t>();
      s.stride = j.at("stride").get<std::size_t>();
      s.padding = j.at("padding").get<std::size_t>();
      break;
    case LayerKind::kBatchNorm2d:
      s.in_features = j.at("channels").get<std::size_t>();
      s.eps = j.at("eps").get<double>();
      s.momentum = j.at("momentum").get<double>();
      break;
    case LayerKind::kElu: s.alpha = j.at("alpha").get<double>(); break;
    case LayerKind::kMaxPool2d:
      s.kernel = j.at("pool").get<std::size_t>();
      s.stride = j.at("stride").get<std::size_t>();
      if (s.kernel != 2 || s.stride != 2) throw Error(ErrorCode::kInvalidArgument, "only 2x2/2 pooling is supported");
      break;
    case LayerKind::kDropout: s.rate = j.at("rate").get<double>(); break;
    case LayerKind::kDense:
      s.in_features = j.at("in_features").get<std::size_t>();
      s.out_features = j.at("out_features").get<std::size_t>();
      break;
    case LayerKind::kStandardize:
    case LayerKind::kFlatten:
    case LayerKind::kSoftmax: break;
  }
  return s;
}

template <typename Tensors>
std::size_t total_size(const Tensors& tensors) {
  std::size_t n = 0;
  for (const auto* t : tensors) n += t->value.size();
  return n;
}

void fill_uniform(Tensor<float>& t, double limit, CounterRng& rng) {
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-limit, limit));
}

}  // namespace

SerModel::SerModel(std::vector<LayerPtr> layers, Shape input_shape,
                   std::array<data::ClassLabel, data::kNumClasses> class_labels)
    : layers_(std::move(layers)), input_shape_(std::move(input_shape)), class_labels_(class_labels) {
  validate();
}

SerModel::SerModel(const SerModel& other) : input_shape_(other.input_shape_), class_labels_(other.class_labels_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

SerModel& SerModel::operator=(const SerModel& other) {
  if (this != &other) *this = SerModel(other);
  return *this;
}

void SerModel::validate() const {
  if (layers_.empty() || layers_.back()->spec().kind != LayerKind::kSoftmax) {
    throw Error(ErrorCode::kShapeMismatch, "layer stack must end with softmax");
  }
  Shape shape = input_shape_;
  for (const auto& l : layers_) shape = l->output_shape(shape);
  if (shape != Shape{data::kNumClasses}) {
    throw Error(ErrorCode::kShapeMismatch, "layer stack produces " + shape_string(shape) + ", expected [12]");
  }
}

bool SerModel::standardizes_input() const noexcept {
  return !layers_.empty() && layers_.front()->spec().kind == LayerKind::kStandardize;
}

std::vector<LayerSpec> SerModel::architecture() const {
  std::vector<LayerSpec> specs;
  specs.reserve(layers_.size());
  for (const auto& l : layers_) specs.push_back(l->spec());
  return specs;
}

Tensor<float> SerModel::infer(const Tensor<float>& batch) const {
  if (batch.rank() != input_shape_.size() + 1 ||
      !std::equal(input_shape_.begin(), input_shape_.end(), batch.shape().begin() + 1)) {
    throw Error(ErrorCode::kShapeMismatch, "model expects [N," + shape_string(input_shape_).substr(1) + ", got " +
                                               shape_string(batch.shape()));
  }
  Tensor<float> x = layers_.front()->infer(batch);
  for (std::size_t i = 1; i < layers_.size(); ++i) x = layers_[i]->infer(x);
  return x;
}

Tensor<float> SerModel::forward_train(const Tensor<float>& batch, nn::TrainContext& ctx) {
  if (batch.rank() != input_shape_.size() + 1 ||
      !std::equal(input_shape_.begin(), input_shape_.end(), batch.shape().begin() + 1)) {
    throw Error(ErrorCode::kShapeMismatch, "model expects [N," + shape_string(input_shape_).substr(1) + ", got " +
                                               shape_string(batch.shape()));
  }
  Tensor<float> x = layers_.front()->forward(batch, ctx);
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    x = layers_[i]->forward(x, ctx);
    if (!x.all_finite()) {
      throw Error(ErrorCode::kNonFinite, "layer " + std::to_string(i) + " (" +
                                             std::string(nn::to_string(layers_[i]->spec().kind)) +
                                             ") produced a non-finite activation");
    }
  }
  return x;
}

void SerModel::backward_from_logits(const Tensor<float>& grad_logits) {
  Tensor<float> g = grad_logits;
  // The softmax (last layer) is folded into the logits gradient.
  for (std::size_t i = layers_.size() - 1; i-- > 0;) g = layers_[i]->backward(g);
}

std::vector<nn::Parameter<float>*> SerModel::parameters() {
  std::vector<nn::Parameter<float>*> out;
  for (auto& l : layers_) {
    auto p = l->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<const nn::Parameter<float>*> SerModel::parameters() const {
  std::vector<const nn::Parameter<float>*> out;
  for (const auto& l : layers_) {
    auto p = std::as_const(*l).parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<const nn::Buffer<float>*> SerModel::buffers() const {
  std::vector<const nn::Buffer<float>*> out;
  for (const auto& l : layers_) {
    auto b = std::as_const(*l).buffers();
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

std::vector<nn::Buffer<float>*> SerModel::buffers() {
  std::vector<nn::Buffer<float>*> out;
  for (auto& l : layers_) {
    auto b = l->buffers();
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

std::size_t SerModel::parameter_count() const { return total_size(parameters()); }

std::size_t SerModel::stored_scalar_count() const { return parameter_count() + total_size(buffers()); }

SerModel build_ser_model(std::uint64_t seed, const ArchitectureOptions& options) {
  using nn::LayerKind;
  std::vector<SerModel::LayerPtr> layers;
  auto add = [&](const LayerSpec& s) { layers.push_back(nn::make_layer<float>(s)); };

  add({.kind = LayerKind::kStandardize});
  std::size_t channels = 1;
  std::size_t height = options.n_mels;
  std::size_t width = options.n_frames;
  for (std::size_t out : options.conv_channels) {
    add({.kind = LayerKind::kConv2d, .in_features = channels, .out_features = out, .kernel = options.kernel,
         .stride = 1, .padding = options.kernel / 2});
    add({.kind = LayerKind::kBatchNorm2d, .in_features = out, .eps = 1e-5, .momentum = 0.9});
    add({.kind = LayerKind::kElu, .alpha = 1.0});
    add({.kind = LayerKind::kMaxPool2d, .kernel = 2, .stride = 2});
    add({.kind = LayerKind::kDropout, .rate = options.conv_dropout});
    channels = out;
    height /= 2;
    width /= 2;
  }
  add({.kind = LayerKind::kFlatten});
  add({.kind = LayerKind::kDense, .in_features = channels * height * width, .out_features = options.hidden_units});
  add({.kind = LayerKind::kElu, .alpha = 1.0});
  add({.kind = LayerKind::kDropout, .rate = options.dense_dropout});
  add({.kind = LayerKind::kDense, .in_features = options.hidden_units, .out_features = data::kNumClasses});
  add({.kind = LayerKind::kSoftmax});

  SerModel model(std::move(layers), {1, options.n_mels, options.n_frames});

  CounterRng rng(seed, "init");
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    auto& layer = model.layer(i);
    const LayerSpec s = layer.spec();
    if (s.kind != LayerKind::kConv2d && s.kind != LayerKind::kDense) continue;
    const std::size_t fan_in = s.kind == LayerKind::kConv2d ? s.in_features * s.kernel * s.kernel : s.in_features;
    fill_uniform(layer.parameters().front()->value, std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
  }
  return model;
}

std::size_t expected_parameter_count(const ArchitectureOptions& options) {
  std::size_t total = 0;
  std::size_t channels = 1, height = options.n_mels, width = options.n_frames;
  for (std::size_t out : options.conv_channels) {
    total += out * channels * options.kernel * options.kernel + out;  // conv weights + bias
    total += 2 * out;                                                 // gamma + beta
    channels = out;
    height /= 2;
    width /= 2;
  }
  const std::size_t flat = channels * height * width;
  total += flat * options.hidden_units + options.hidden_units;
  total += options.hidden_units * data::kNumClasses + data::kNumClasses;
  return total;
}

PredictionResult rank_probabilities(std::span<const float> probs,
                                    const std::array<data::ClassLabel, data::kNumClasses>& labels) {
  if (probs.size() != labels.size()) {
    throw Error(ErrorCode::kShapeMismatch, "expected " + std::to_string(labels.size()) + " probabilities");
  }
  PredictionResult result;
  result.ranked.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) result.ranked.push_back({labels[i], probs[i]});
  std::stable_sort(result.ranked.begin(), result.ranked.end(),
                   [](const RankedClass& a, const RankedClass& b) { return a.probability > b.probability; });
  result.top1 = result.ranked.front().label;
  return result;
}

Tensor<float> features_to_batch(const dsp::MelSpectrogram& features) {
  const dsp::MelSpectrogram* one[] = {&features};
  return features_to_batch(one);
}

Tensor<float> features_to_batch(std::span<const dsp::MelSpectrogram* const> features) {
  if (features.empty()) throw Error(ErrorCode::kShapeMismatch, "empty batch");
  const std::size_t mels = features.front()->n_mels, frames = features.front()->n_frames;
  Tensor<float> batch({features.size(), 1, mels, frames});
  float* dst = batch.data();
  for (const auto* f : features) {
    if (f->n_mels != mels || f->n_frames != frames || f->values.size() != mels * frames) {
      throw Error(ErrorCode::kShapeMismatch, "batch mixes spectrogram shapes");
    }
    dst = std::copy(f->values.begin(), f->values.end(), dst);
  }
  return batch;
}

PredictionResult predict(const SerModel& model, const dsp::MelSpectrogram& features) {
  const Shape& in = model.input_shape();
  if (features.n_mels != in[1] || features.n_frames != in[2]) {
    throw Error(ErrorCode::kShapeMismatch, "features are " + std::to_string(features.n_mels) + "x" +
                                               std::to_string(features.n_frames) + ", model expects " +
                                               std::to_string(in[1]) + "x" + std::to_string(in[2]));
  }
  const Tensor<float> probs = model.infer(features_to_batch(features));
  return rank_probabilities(probs.values(), model.class_labels());
}

std::vector<std::uint8_t> serialize_model(const SerModel& model) {
  json header;
  header["format"] = "SERM";
  header["version"] = kModelFormatVersion;
  header["input_shape"] = model.input_shape();
  header["normalization"] = model.standardizes_input() ? "per_input_standardize" : "none";
  json labels = json::array();
  for (const auto& l : model.class_labels()) labels.push_back(l.name());
  header["class_labels"] = labels;
  json layers = json::array();
  for (const auto& s : model.architecture()) layers.push_back(spec_to_json(s));
  header["layers"] = layers;

  json tensors = json::array();
  std::size_t scalars = 0;
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    const auto& layer = model.layer(i);
    for (const auto* p : layer.parameters()) {
      tensors.push_back({{"name", "layers." + std::to_string(i) + "." + p->name}, {"shape", p->value.shape()}});
      scalars += p->value.size();
    }
    for (const auto* b : layer.buffers()) {
      tensors.push_back({{"name", "layers." + std::to_string(i) + "." + b->name}, {"shape", b->value.shape()}});
      scalars += b->value.size();
    }
  }
  header["tensors"] = tensors;
  header["scalar_count"] = scalars;

  const std::string text = header.dump();
  std::vector<std::uint8_t> out;
  out.reserve(kPreambleBytes + text.size() + 4 * scalars + 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kModelFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    const auto& layer = model.layer(i);
    for (const auto* p : layer.parameters()) {
      for (float v : p->value.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    for (const auto* b : layer.buffers()) {
      for (float v : b->value.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
  }
  const std::uint32_t crc = crc32_of(std::span<const std::uint8_t>(out).subspan(kPreambleBytes));
  put_u32(out, crc);
  return out;
}

SerModel deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPreambleBytes) {
    throw Error(ErrorCode::kTruncatedFile, "model file is " + std::to_string(bytes.size()) + " bytes");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "not a SERM model file");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::kVersionMismatch, "model file version " + std::to_string(version) +
                                                 ", this build reads version " + std::to_string(kModelFormatVersion));
  }
  const std::uint32_t header_len = get_u32(bytes.data() + 8);
  if (bytes.size() < kPreambleBytes + header_len + 4) {
    throw Error(ErrorCode::kTruncatedFile, "model file ends inside its header");
  }

  json header;
  try {
    header = json::parse(bytes.begin() + kPreambleBytes, bytes.begin() + kPreambleBytes + header_len);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kChecksumFailure, std::string("model header is corrupt: ") + e.what());
  }

  try {
    const auto scalars = header.at("scalar_count").get<std::size_t>();
    const std::size_t expected = kPreambleBytes + header_len + 4 * scalars + 4;
    if (bytes.size() < expected) {
      throw Error(ErrorCode::kTruncatedFile, "model file is " + std::to_string(bytes.size()) + " bytes, header promises " +
                                                 std::to_string(expected));
    }
    if (bytes.size() > expected) {
      throw Error(ErrorCode::kChecksumFailure, std::to_string(bytes.size() - expected) + " unexpected trailing bytes");
    }
    const std::uint32_t stored = get_u32(bytes.data() + bytes.size() - 4);
    const std::uint32_t actual = crc32_of(bytes.subspan(kPreambleBytes, bytes.size() - kPreambleBytes - 4));
    if (stored != actual) throw Error(ErrorCode::kChecksumFailure, "CRC-32 mismatch in model payload");

    std::vector<SerModel::LayerPtr> layers;
    for (const auto& j : header.at("layers")) layers.push_back(nn::make_layer<float>(spec_from_json(j)));

    std::array<data::ClassLabel, data::kNumClasses> labels;
    const auto& label_names = header.at("class_labels");
    if (label_names.size() != data::kNumClasses) throw Error(ErrorCode::kShapeMismatch, "model must carry 12 labels");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto name = label_names[i].get<std::string>();
      const auto space = name.find(' ');
      if (space == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "bad class label '" + name + "'");
      labels[i] = {data::parse_gender(name.substr(0, space)), data::parse_emotion(name.substr(space + 1))};
    }

    SerModel model(std::move(layers), header.at("input_shape").get<Shape>(), labels);
    if (model.stored_scalar_count() != scalars) {
      throw Error(ErrorCode::kShapeMismatch, "architecture holds " + std::to_string(model.stored_scalar_count()) +
                                                 " scalars, header says " + std::to_string(scalars));
    }

    const std::uint8_t* p = bytes.data() + kPreambleBytes + header_len;
    auto read_into = [&p](Tensor<float>& t) {
      for (float& v : t.values()) {
        v = std::bit_cast<float>(get_u32(p));
        p += 4;
      }
    };
    for (std::size_t i = 0; i < model.layer_count(); ++i) {
      auto& layer = model.layer(i);
      for (auto* param : layer.parameters()) read_into(param->value);
      for (auto* buffer : layer.buffers()) read_into(buffer->value);
    }
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("model header is incomplete: ") + e.what());
  }
}

void save_model(const SerModel& model, const std::string& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "short write to " + path);
}

SerModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

std::uint32_t model_fingerprint(const SerModel& model) {
  const auto bytes = serialize_model(model);
  return get_u32(bytes.data() + bytes.size() - 4);
}

}  // namespace ser::model
