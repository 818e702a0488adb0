#include "ser/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "ser/error.hpp"
#include "ser/rng.hpp"

namespace ser::data {
namespace {

constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "neutral", "happy", "sad", "angry", "fearful", "disgust"};
constexpr std::array<std::string_view, 8> kSourceEmotionNames = {
    "neutral", "calm", "happy", "sad", "angry", "fearful", "disgust", "surprised"};

constexpr int kSplitAttempts = 1000;
constexpr std::string_view kManifestHeader = "# ser-manifest v1";

int parse_two_digit(std::string_view field, std::string_view name) {
  int value = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.size() != 2 || ec != std::errc{} || ptr != end) {
    throw Error(ErrorCode::kMalformedName, "field '" + std::string(field) + "' in '" + std::string(name) +
                                               "' is not a two-digit number");
  }
  return value;
}

void check_range(int value, int lo, int hi, std::string_view what, std::string_view name) {
  if (value < lo || value > hi) {
    throw Error(ErrorCode::kCodeOutOfRange, std::string(what) + " code " + std::to_string(value) + " in '" +
                                                std::string(name) + "' outside " + std::to_string(lo) + ".." +
                                                std::to_string(hi));
  }
}

std::string two_digits(int v) {
  std::string s = std::to_string(v);
  return s.size() < 2 ? "0" + s : s;
}

}  // namespace

std::string_view to_string(Gender g) noexcept { return g == Gender::kMale ? "male" : "female"; }

std::string_view to_string(Emotion e) noexcept { return kEmotionNames[static_cast<std::size_t>(e)]; }

std::string_view to_string(SourceEmotion e) noexcept { return kSourceEmotionNames[static_cast<std::size_t>(e)]; }

Gender parse_gender(std::string_view s) {
  if (s == "male") return Gender::kMale;
  if (s == "female") return Gender::kFemale;
  throw Error(ErrorCode::kInvalidArgument, "unknown gender '" + std::string(s) + "'");
}

Emotion parse_emotion(std::string_view s) {
  for (std::size_t i = 0; i < kEmotionNames.size(); ++i) {
    if (kEmotionNames[i] == s) return static_cast<Emotion>(i);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown emotion '" + std::string(s) + "'");
}

ClassLabel ClassLabel::from_index(std::size_t index) {
  if (index >= kNumClasses) {
    throw Error(ErrorCode::kInvalidTarget, "class index " + std::to_string(index) + " outside 0..11");
  }
  const Gender g = index >= kNumEmotions ? Gender::kFemale : Gender::kMale;
  return {g, static_cast<Emotion>(index % kNumEmotions)};
}

std::string ClassLabel::name() const {
  return std::string(to_string(gender_)) + " " + std::string(to_string(emotion_));
}

std::array<ClassLabel, kNumClasses> all_class_labels() {
  std::array<ClassLabel, kNumClasses> labels;
  for (std::size_t i = 0; i < kNumClasses; ++i) labels[i] = ClassLabel::from_index(i);
  return labels;
}

RawLabel parse_ravdess_filename(std::string_view name) {
  if (const auto slash = name.find_last_of("/\\"); slash != std::string_view::npos) {
    name.remove_prefix(slash + 1);
  }
  constexpr std::string_view kExt = ".wav";
  if (name.size() < kExt.size() || name.substr(name.size() - kExt.size()) != kExt) {
    throw Error(ErrorCode::kMalformedName, "'" + std::string(name) + "' does not end in .wav");
  }
  const std::string_view stem = name.substr(0, name.size() - kExt.size());

  std::array<int, 7> codes{};
  std::size_t field = 0;
  std::size_t start = 0;
  while (true) {
    const std::size_t dash = stem.find('-', start);
    const std::string_view part = stem.substr(start, dash == std::string_view::npos ? dash : dash - start);
    if (field >= codes.size()) {
      throw Error(ErrorCode::kMalformedName, "'" + std::string(name) + "' has more than seven fields");
    }
    codes[field++] = parse_two_digit(part, name);
    if (dash == std::string_view::npos) break;
    start = dash + 1;
  }
  if (field != codes.size()) {
    throw Error(ErrorCode::kMalformedName, "'" + std::string(name) + "' has " + std::to_string(field) +
                                               " fields, expected seven");
  }

  check_range(codes[0], 1, 3, "modality", name);
  check_range(codes[1], 1, 2, "vocal channel", name);
  check_range(codes[2], 1, 8, "emotion", name);
  check_range(codes[3], 1, 2, "intensity", name);
  check_range(codes[4], 1, 2, "statement", name);
  check_range(codes[5], 1, 2, "repetition", name);
  check_range(codes[6], 1, 24, "actor", name);
  if (codes[2] == 1 && codes[3] == 2) {
    throw Error(ErrorCode::kCodeOutOfRange, "neutral has no strong intensity in '" + std::string(name) + "'");
  }

  RawLabel raw;
  raw.modality = static_cast<Modality>(codes[0] - 1);
  raw.vocal_channel = static_cast<VocalChannel>(codes[1] - 1);
  raw.emotion = static_cast<SourceEmotion>(codes[2] - 1);
  raw.intensity = codes[3];
  raw.statement = codes[4];
  raw.repetition = codes[5];
  raw.actor_id = codes[6];
  raw.gender = raw.actor_id % 2 == 1 ? Gender::kMale : Gender::kFemale;
  return raw;
}

std::string format_ravdess_filename(const RawLabel& raw) {
  return two_digits(static_cast<int>(raw.modality) + 1) + "-" +
         two_digits(static_cast<int>(raw.vocal_channel) + 1) + "-" +
         two_digits(static_cast<int>(raw.emotion) + 1) + "-" + two_digits(raw.intensity) + "-" +
         two_digits(raw.statement) + "-" + two_digits(raw.repetition) + "-" + two_digits(raw.actor_id) + ".wav";
}

ClassLabel convert_label(const RawLabel& raw) {
  Emotion e = Emotion::kNeutral;
  switch (raw.emotion) {
    case SourceEmotion::kNeutral:
    case SourceEmotion::kCalm: e = Emotion::kNeutral; break;
    case SourceEmotion::kHappy:
    case SourceEmotion::kSurprised: e = Emotion::kHappy; break;
    case SourceEmotion::kSad: e = Emotion::kSad; break;
    case SourceEmotion::kAngry: e = Emotion::kAngry; break;
    case SourceEmotion::kFearful: e = Emotion::kFearful; break;
    case SourceEmotion::kDisgust: e = Emotion::kDisgust; break;
  }
  return {raw.gender, e};
}

DatasetBuild build_dataset(const std::filesystem::path& root, const dsp::StftParams& sp,
                           const dsp::MelParams& mp) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorCode::kEmptyDataset, "'" + root.string() + "' is not a directory");
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  DatasetBuild build;
  for (const auto& path : files) {
    const std::string id = path.string();
    try {
      const RawLabel raw = parse_ravdess_filename(path.filename().string());
      if (raw.modality != Modality::kAudioOnly || raw.vocal_channel != VocalChannel::kSpeech) {
        ++build.filtered_out;
        continue;
      }
      LabeledExample example;
      example.features = dsp::extract_features(audio::read_wav_file(id), sp, mp);
      example.label = convert_label(raw);
      example.actor_id = raw.actor_id;
      example.source_id = id;
      build.examples.push_back(std::move(example));
    } catch (const Error& e) {
      build.skipped.push_back({id, e.what()});
    }
  }
  if (build.examples.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "no usable audio-only speech files under '" + root.string() + "' (" +
                                              std::to_string(build.skipped.size()) + " skipped)");
  }
  return build;
}

Split split_train_test(std::span<const ExampleMeta> examples, std::uint64_t seed, std::size_t test_size) {
  if (examples.size() < test_size) {
    throw Error(ErrorCode::kInsufficientData, std::to_string(examples.size()) + " examples, need at least " +
                                                  std::to_string(test_size));
  }

  std::vector<std::size_t> held_out;
  std::vector<std::size_t> pool;
  std::set<Emotion> emotions;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    (examples[i].actor_id == kHeldOutActor ? held_out : pool).push_back(i);
    emotions.insert(examples[i].label.emotion());
  }
  if (held_out.size() > test_size) {
    throw Error(ErrorCode::kInsufficientData, "actor " + std::to_string(kHeldOutActor) + " alone has " +
                                                  std::to_string(held_out.size()) + " examples, test size is " +
                                                  std::to_string(test_size));
  }
  const std::size_t draw = test_size - held_out.size();

  CounterRng rng(seed, "split");
  for (int attempt = 0; attempt < kSplitAttempts; ++attempt) {
    std::vector<std::size_t> candidates = pool;
    for (std::size_t i = 0; i < draw; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
      std::swap(candidates[i], candidates[j]);
    }

    Split split;
    split.test = held_out;
    split.test.insert(split.test.end(), candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(draw));
    std::set<Emotion> covered;
    for (std::size_t i : split.test) covered.insert(examples[i].label.emotion());
    if (covered != emotions) continue;

    std::sort(split.test.begin(), split.test.end());
    std::vector<bool> in_test(examples.size(), false);
    for (std::size_t i : split.test) in_test[i] = true;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      if (!in_test[i]) split.train.push_back(i);
    }
    return split;
  }
  throw Error(ErrorCode::kInsufficientData, "no test sample of size " + std::to_string(test_size) +
                                                " covering every emotion after " + std::to_string(kSplitAttempts) +
                                                " draws");
}

Split split_train_test(std::span<const LabeledExample> examples, std::uint64_t seed, std::size_t test_size) {
  std::vector<ExampleMeta> meta;
  meta.reserve(examples.size());
  for (const auto& e : examples) meta.push_back({e.source_id, e.label, e.actor_id});
  return split_train_test(std::span<const ExampleMeta>(meta), seed, test_size);
}

std::string format_manifest(std::span<const ManifestRecord> records) {
  std::string out(kManifestHeader);
  out += '\n';
  for (const auto& r : records) {
    out += r.path + '\t' + std::to_string(r.class_index) + '\t' + std::to_string(r.actor_id) + '\t' + r.split + '\n';
  }
  return out;
}

std::vector<ManifestRecord> parse_manifest(std::string_view text) {
  std::vector<ManifestRecord> records;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      header_seen = header_seen || line == kManifestHeader;
      continue;
    }
    if (!header_seen) throw Error(ErrorCode::kVersionMismatch, "manifest lacks '" + std::string(kManifestHeader) + "'");

    std::vector<std::string> fields;
    std::istringstream row(line);
    std::string field;
    while (std::getline(row, field, '\t')) fields.push_back(field);
    if (fields.size() != 4) {
      throw Error(ErrorCode::kInvalidArgument, "manifest line " + std::to_string(line_no) + ": expected 4 fields");
    }
    ManifestRecord r;
    r.path = fields[0];
    try {
      r.class_index = std::stoul(fields[1]);
      r.actor_id = std::stoi(fields[2]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "manifest line " + std::to_string(line_no) + ": bad number");
    }
    if (r.class_index >= kNumClasses) {
      throw Error(ErrorCode::kInvalidTarget, "manifest line " + std::to_string(line_no) + ": class index out of range");
    }
    r.split = fields[3];
    if (r.split != "train" && r.split != "test") {
      throw Error(ErrorCode::kInvalidArgument, "manifest line " + std::to_string(line_no) + ": split must be train or test");
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_manifest(const std::string& path, std::span<const ManifestRecord> records) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out << format_manifest(records);
}

std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str());
}

}  // namespace ser::data
