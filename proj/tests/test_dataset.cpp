#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "ser/audio_io.hpp"
#include "ser/dataset.hpp"
#include "ser/error.hpp"
#include "test_util.hpp"

namespace {

using namespace ser;
using namespace ser::data;
namespace fs = std::filesystem;

template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIoError;
}

// Every valid audio-only speech tuple: 24 actors x 2 statements x 2 repetitions
// x (neutral at normal intensity + 7 emotions at both intensities).
std::vector<RawLabel> speech_grid() {
  std::vector<RawLabel> out;
  for (int actor = 1; actor <= 24; ++actor) {
    for (int emotion = 1; emotion <= 8; ++emotion) {
      for (int intensity = 1; intensity <= (emotion == 1 ? 1 : 2); ++intensity) {
        for (int statement = 1; statement <= 2; ++statement) {
          for (int repetition = 1; repetition <= 2; ++repetition) {
            RawLabel r;
            r.modality = Modality::kAudioOnly;
            r.vocal_channel = VocalChannel::kSpeech;
            r.emotion = static_cast<SourceEmotion>(emotion - 1);
            r.intensity = intensity;
            r.statement = statement;
            r.repetition = repetition;
            r.actor_id = actor;
            r.gender = actor % 2 == 1 ? Gender::kMale : Gender::kFemale;
            out.push_back(r);
          }
        }
      }
    }
  }
  return out;
}

std::vector<ExampleMeta> grid_metas() {
  std::vector<ExampleMeta> metas;
  for (const RawLabel& r : speech_grid()) {
    metas.push_back({format_ravdess_filename(r), convert_label(r), r.actor_id});
  }
  return metas;
}

TEST(RavdessName, DocumentedExamples) {
  const RawLabel a = parse_ravdess_filename("03-01-05-01-01-01-12.wav");
  EXPECT_EQ(a.emotion, SourceEmotion::kAngry);
  EXPECT_EQ(a.actor_id, 12);
  EXPECT_EQ(a.gender, Gender::kFemale);
  EXPECT_EQ(a.vocal_channel, VocalChannel::kSpeech);
  EXPECT_EQ(a.modality, Modality::kAudioOnly);

  const RawLabel b = parse_ravdess_filename("/data/Actor_01/03-01-01-01-01-01-01.wav");
  EXPECT_EQ(b.emotion, SourceEmotion::kNeutral);
  EXPECT_EQ(b.actor_id, 1);
  EXPECT_EQ(b.gender, Gender::kMale);
}

TEST(RavdessName, GridRoundTripsAndHas1440Entries) {
  const auto grid = speech_grid();
  EXPECT_EQ(grid.size(), 1440u);
  std::set<std::string> names;
  for (const RawLabel& r : grid) {
    const std::string name = format_ravdess_filename(r);
    ASSERT_EQ(parse_ravdess_filename(name), r) << name;
    names.insert(name);
  }
  EXPECT_EQ(names.size(), 1440u);
}

TEST(RavdessName, GenderFollowsActorParity) {
  for (int actor = 1; actor <= 24; ++actor) {
    const auto r = parse_ravdess_filename("03-01-02-01-01-01-" + std::string(actor < 10 ? "0" : "") +
                                          std::to_string(actor) + ".wav");
    EXPECT_EQ(r.gender == Gender::kMale, actor % 2 == 1) << actor;
  }
}

TEST(RavdessName, Errors) {
  EXPECT_EQ(error_of([] { parse_ravdess_filename("03-01-09-01-01-01-01.wav"); }), ErrorCode::kCodeOutOfRange);
  EXPECT_EQ(error_of([] { parse_ravdess_filename("03-01-01-01-01-01-25.wav"); }), ErrorCode::kCodeOutOfRange);
  EXPECT_EQ(error_of([] { parse_ravdess_filename("04-01-01-01-01-01-01.wav"); }), ErrorCode::kCodeOutOfRange);
  EXPECT_EQ(error_of([] { parse_ravdess_filename("03-01-01-02-01-01-01.wav"); }), ErrorCode::kCodeOutOfRange);
  EXPECT_EQ(error_of([] { parse_ravdess_filename("03-01-01-01-01-01.wav"); }), ErrorCode::kMalformedName);
  EXPECT_EQ(error_of([] { parse_ravdess_filename("03-01-01-01-01-01-01-01.wav"); }), ErrorCode::kMalformedName);
  EXPECT_EQ(error_of([] { parse_ravdess_filename("03-01-1-01-01-01-01.wav"); }), ErrorCode::kMalformedName);
  EXPECT_EQ(error_of([] { parse_ravdess_filename("03-01-xx-01-01-01-01.wav"); }), ErrorCode::kMalformedName);
  EXPECT_EQ(error_of([] { parse_ravdess_filename("03-01-01-01-01-01-01.mp3"); }), ErrorCode::kMalformedName);
  EXPECT_EQ(error_of([] { parse_ravdess_filename(""); }), ErrorCode::kMalformedName);
}

TEST(ConvertLabel, MergePolicy) {
  RawLabel r;
  r.emotion = SourceEmotion::kCalm;
  r.gender = Gender::kMale;
  EXPECT_EQ(convert_label(r), ClassLabel(Gender::kMale, Emotion::kNeutral));
  r.emotion = SourceEmotion::kSurprised;
  r.gender = Gender::kFemale;
  EXPECT_EQ(convert_label(r), ClassLabel(Gender::kFemale, Emotion::kHappy));
  r.emotion = SourceEmotion::kAngry;
  r.gender = Gender::kMale;
  r.intensity = 2;
  EXPECT_EQ(convert_label(r), ClassLabel(Gender::kMale, Emotion::kAngry));
}

TEST(ConvertLabel, EveryClassReachableAndIndicesDense) {
  std::set<std::size_t> seen;
  for (const RawLabel& r : speech_grid()) seen.insert(convert_label(r).index());
  EXPECT_EQ(seen.size(), 12u);
  const auto labels = all_class_labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    EXPECT_EQ(labels[i].index(), i);
    EXPECT_EQ(ClassLabel::from_index(i), labels[i]);
  }
  EXPECT_EQ(labels[0].name(), "male neutral");
  EXPECT_EQ(labels[9].name(), "female angry");
  EXPECT_EQ(error_of([] { ClassLabel::from_index(12); }), ErrorCode::kInvalidTarget);
  EXPECT_EQ(parse_gender("female"), Gender::kFemale);
  EXPECT_EQ(parse_emotion("disgust"), Emotion::kDisgust);
  EXPECT_EQ(error_of([] { parse_emotion("calm"); }), ErrorCode::kInvalidArgument);
}

TEST(BuildDataset, OneValidFile) {
  ser::testing::TempDir dir("ds1");
  audio::write_wav_file(dir.file("03-01-05-01-01-01-03.wav"), ser::testing::tone({220.0}, 0.5));
  const auto build = build_dataset(dir.path());
  ASSERT_EQ(build.examples.size(), 1u);
  EXPECT_TRUE(build.skipped.empty());
  EXPECT_EQ(build.filtered_out, 0u);
  const auto& ex = build.examples[0];
  EXPECT_EQ(ex.label, ClassLabel(Gender::kMale, Emotion::kAngry));
  EXPECT_EQ(ex.actor_id, 3);
  EXPECT_EQ(ex.features.n_mels, 128u);
  EXPECT_EQ(ex.features.n_frames, 130u);
}

TEST(BuildDataset, TruncatedFileIsSkippedAndReported) {
  ser::testing::TempDir dir("ds2");
  audio::write_wav_file(dir.file("03-01-05-01-01-01-03.wav"), ser::testing::tone({220.0}, 0.5));
  auto bytes = audio::encode_wav(ser::testing::tone({220.0}, 0.5));
  bytes.resize(bytes.size() / 2);
  {
    std::ofstream out(dir.file("03-01-04-01-01-01-03.wav"), std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  const auto build = build_dataset(dir.path());
  EXPECT_EQ(build.examples.size(), 1u);
  ASSERT_EQ(build.skipped.size(), 1u);
  EXPECT_NE(build.skipped[0].path.find("03-01-04"), std::string::npos);
  EXPECT_NE(build.skipped[0].reason.find("MalformedContainer"), std::string::npos);
}

TEST(BuildDataset, FiltersSongAndVideoAndSortsByPath) {
  ser::testing::TempDir dir("ds3");
  fs::create_directories(dir.path() / "Actor_02");
  fs::create_directories(dir.path() / "Actor_01");
  const auto clip = ser::testing::tone({300.0}, 0.3);
  audio::write_wav_file((dir.path() / "Actor_02" / "03-01-03-01-01-01-02.wav").string(), clip);
  audio::write_wav_file((dir.path() / "Actor_01" / "03-01-03-01-01-01-01.wav").string(), clip);
  audio::write_wav_file((dir.path() / "Actor_01" / "03-02-03-01-01-01-01.wav").string(), clip);
  audio::write_wav_file((dir.path() / "Actor_01" / "01-01-03-01-01-01-01.wav").string(), clip);
  audio::write_wav_file((dir.path() / "Actor_01" / "notes.wav").string(), clip);
  const auto build = build_dataset(dir.path());
  ASSERT_EQ(build.examples.size(), 2u);
  EXPECT_EQ(build.examples[0].actor_id, 1);
  EXPECT_EQ(build.examples[1].actor_id, 2);
  EXPECT_EQ(build.filtered_out, 2u);
  EXPECT_EQ(build.skipped.size(), 1u);
}

TEST(BuildDataset, EmptyOrMissingDirectory) {
  ser::testing::TempDir dir("ds4");
  EXPECT_EQ(error_of([&] { build_dataset(dir.path()); }), ErrorCode::kEmptyDataset);
  EXPECT_EQ(error_of([&] { build_dataset(dir.path() / "nope"); }), ErrorCode::kEmptyDataset);
}

TEST(Split, FullGridContract) {
  const auto metas = grid_metas();
  const Split split = split_train_test(std::span<const ExampleMeta>(metas), 42);
  EXPECT_EQ(split.test.size(), 180u);
  EXPECT_EQ(split.train.size() + split.test.size(), metas.size());
  EXPECT_TRUE(std::is_sorted(split.train.begin(), split.train.end()));
  EXPECT_TRUE(std::is_sorted(split.test.begin(), split.test.end()));

  std::vector<std::size_t> all = split.train;
  all.insert(all.end(), split.test.begin(), split.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) ASSERT_EQ(all[i], i);

  std::size_t actor24_in_test = 0;
  for (std::size_t i : split.train) ASSERT_NE(metas[i].actor_id, kHeldOutActor);
  std::set<Emotion> emotions;
  for (std::size_t i : split.test) {
    actor24_in_test += metas[i].actor_id == kHeldOutActor;
    emotions.insert(metas[i].label.emotion());
  }
  EXPECT_EQ(actor24_in_test, 60u);
  EXPECT_EQ(emotions.size(), kNumEmotions);
}

TEST(Split, DeterministicPerSeedAndSeedSensitive) {
  const auto metas = grid_metas();
  const auto span = std::span<const ExampleMeta>(metas);
  const Split a = split_train_test(span, 7);
  const Split b = split_train_test(span, 7);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_NE(split_train_test(span, 8).test, a.test);
}

TEST(Split, FrozenSelectionForSeed42) {
  // Pins the counter-based draw so splits stay reproducible across builds.
  const auto metas = grid_metas();
  const Split s = split_train_test(std::span<const ExampleMeta>(metas), 42);
  const std::vector<std::size_t> head(s.test.begin(), s.test.begin() + 8);
  EXPECT_EQ(head, (std::vector<std::size_t>{13, 20, 33, 36, 40, 41, 46, 62}));
}

TEST(Split, SmallInputsAndErrors) {
  auto metas = grid_metas();
  std::vector<ExampleMeta> few(metas.begin(), metas.begin() + 100);
  EXPECT_EQ(error_of([&] { split_train_test(std::span<const ExampleMeta>(few), 1); }), ErrorCode::kInsufficientData);

  // Without actor 24 the test set is drawn entirely from the pool.
  std::vector<ExampleMeta> no24;
  for (const auto& m : metas) {
    if (m.actor_id != kHeldOutActor) no24.push_back(m);
  }
  const Split s = split_train_test(std::span<const ExampleMeta>(no24), 3, 12);
  EXPECT_EQ(s.test.size(), 12u);
  EXPECT_EQ(s.train.size(), no24.size() - 12);

  // Actor 24 alone exceeds a tiny test size.
  EXPECT_EQ(error_of([&] { split_train_test(std::span<const ExampleMeta>(metas), 1, 10); }),
            ErrorCode::kInsufficientData);
}

TEST(Manifest, RoundTripAndErrors) {
  const std::vector<ManifestRecord> records = {
      {"/data/a.wav", 3, 1, "train"},
      {"/data/b c.wav", 11, 24, "test"},
  };
  const std::string text = format_manifest(records);
  EXPECT_EQ(text.rfind("# ser-manifest v1\n", 0), 0u);
  EXPECT_EQ(parse_manifest(text), records);

  ser::testing::TempDir dir("manifest");
  write_manifest(dir.file("m.tsv"), records);
  EXPECT_EQ(read_manifest(dir.file("m.tsv")), records);

  EXPECT_EQ(error_of([] { parse_manifest("a\t1\t1\ttrain\n"); }), ErrorCode::kVersionMismatch);
  EXPECT_EQ(error_of([] { parse_manifest("# ser-manifest v1\na\t1\ttrain\n"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_of([] { parse_manifest("# ser-manifest v1\na\tx\t1\ttrain\n"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_of([] { parse_manifest("# ser-manifest v1\na\t12\t1\ttrain\n"); }), ErrorCode::kInvalidTarget);
  EXPECT_EQ(error_of([] { parse_manifest("# ser-manifest v1\na\t1\t1\tdev\n"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_of([&] { read_manifest(dir.file("missing")); }), ErrorCode::kIoError);
}

}  // namespace
