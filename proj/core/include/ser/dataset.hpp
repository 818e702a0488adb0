#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ser/dsp.hpp"

namespace ser::data {

enum class Gender { kMale, kFemale };
enum class VocalChannel { kSpeech, kSong };
enum class Modality { kAudioVideo, kVideoOnly, kAudioOnly };

/// The eight emotions encoded in RAVDESS filenames, in code order (01..08).
enum class SourceEmotion { kNeutral, kCalm, kHappy, kSad, kAngry, kFearful, kDisgust, kSurprised };

/// The six emotions kept after merging calm into neutral and surprised into happy.
enum class Emotion { kNeutral, kHappy, kSad, kAngry, kFearful, kDisgust };

inline constexpr std::size_t kNumEmotions = 6;
inline constexpr std::size_t kNumClasses = 12;
inline constexpr int kHeldOutActor = 24;
inline constexpr std::size_t kDefaultTestSize = 180;

std::string_view to_string(Gender g) noexcept;
std::string_view to_string(Emotion e) noexcept;
std::string_view to_string(SourceEmotion e) noexcept;
Gender parse_gender(std::string_view s);
Emotion parse_emotion(std::string_view s);

/// Every field of a RAVDESS filename MM-VV-EE-II-SS-RR-AA.wav.
struct RawLabel {
  Modality modality = Modality::kAudioOnly;
  VocalChannel vocal_channel = VocalChannel::kSpeech;
  SourceEmotion emotion = SourceEmotion::kNeutral;
  int intensity = 1;   // 1 normal, 2 strong
  int statement = 1;   // 1..2
  int repetition = 1;  // 1..2
  int actor_id = 1;    // 1..24
  Gender gender = Gender::kMale;

  friend bool operator==(const RawLabel&, const RawLabel&) = default;
};

/// One of the 12 gender x emotion targets. class_index = 6 * female + emotion.
class ClassLabel {
 public:
  constexpr ClassLabel() = default;
  constexpr ClassLabel(Gender gender, Emotion emotion) : gender_(gender), emotion_(emotion) {}

  static ClassLabel from_index(std::size_t index);

  constexpr Gender gender() const noexcept { return gender_; }
  constexpr Emotion emotion() const noexcept { return emotion_; }
  constexpr std::size_t index() const noexcept {
    return (gender_ == Gender::kFemale ? kNumEmotions : 0) + static_cast<std::size_t>(emotion_);
  }

  /// "male angry", "female neutral", ...
  std::string name() const;

  friend constexpr bool operator==(const ClassLabel&, const ClassLabel&) = default;

 private:
  Gender gender_ = Gender::kMale;
  Emotion emotion_ = Emotion::kNeutral;
};

/// All 12 labels in class-index order.
std::array<ClassLabel, kNumClasses> all_class_labels();

/// Throws kMalformedName or kCodeOutOfRange. Accepts a bare name or a path.
RawLabel parse_ravdess_filename(std::string_view name);
std::string format_ravdess_filename(const RawLabel& raw);

/// Calm -> neutral, surprised -> happy; intensity dropped; gender kept.
ClassLabel convert_label(const RawLabel& raw);

struct LabeledExample {
  dsp::MelSpectrogram features;
  ClassLabel label;
  int actor_id = 0;
  std::string source_id;
};

/// What the split needs to know about an example.
struct ExampleMeta {
  std::string source_id;
  ClassLabel label;
  int actor_id = 0;
};

struct SkippedFile {
  std::string path;
  std::string reason;
};

struct DatasetBuild {
  std::vector<LabeledExample> examples;
  std::vector<SkippedFile> skipped;       // decode failures, bad names
  std::size_t filtered_out = 0;           // song / video files
};

/// Every *.wav below root, sorted by path. Audio-only speech files become
/// examples; other modalities and the song channel are counted in
/// filtered_out; files that fail to parse or decode land in skipped.
/// Throws kEmptyDataset when nothing usable remains.
DatasetBuild build_dataset(const std::filesystem::path& root, const dsp::StftParams& sp = {},
                           const dsp::MelParams& mp = {});

struct Split {
  std::vector<std::size_t> train;  // ascending indices into the input
  std::vector<std::size_t> test;   // ascending indices into the input
};

/// Held-out test selection. Every actor-24 example is placed in the test set;
/// the rest of the test set is a seeded uniform sample of the other examples,
/// redrawn until every emotion present in the input is represented. Uses
/// CounterRng(seed, "split"). Throws kInsufficientData when fewer than
/// test_size examples exist or actor 24 alone exceeds test_size.
Split split_train_test(std::span<const ExampleMeta> examples, std::uint64_t seed,
                       std::size_t test_size = kDefaultTestSize);
Split split_train_test(std::span<const LabeledExample> examples, std::uint64_t seed,
                       std::size_t test_size = kDefaultTestSize);

/// Line-delimited manifest: "# ser-manifest v1" then one tab-separated record
/// per example: path, class_index, actor_id, split ("train" | "test").
struct ManifestRecord {
  std::string path;
  std::size_t class_index = 0;
  int actor_id = 0;
  std::string split;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

std::string format_manifest(std::span<const ManifestRecord> records);
std::vector<ManifestRecord> parse_manifest(std::string_view text);
void write_manifest(const std::string& path, std::span<const ManifestRecord> records);
std::vector<ManifestRecord> read_manifest(const std::string& path);

}  // namespace ser::data
