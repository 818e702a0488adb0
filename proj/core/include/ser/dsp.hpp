#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ser/audio_io.hpp"

namespace ser::dsp {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Window { kHann };

struct StftParams {
  std::size_t n_fft = 2048;
  std::size_t hop = 512;
  Window window = Window::kHann;

  void validate() const;
};

struct MelParams {
  std::size_t n_mels = 128;
  double f_min = 0.0;
  double f_max = audio::kCanonicalSampleRate / 2.0;
  std::uint32_t sample_rate = audio::kCanonicalSampleRate;

  void validate() const;
};

inline constexpr double kAmin = 1e-10;
inline constexpr double kTopDb = 80.0;
inline constexpr std::size_t kCanonicalSamples = 66150;  // 3 s at 22050 Hz
inline constexpr std::size_t kCanonicalFrames = 130;

/// n_mels x n_frames matrix in decibels, stored as float (the network's input precision).
struct MelSpectrogram {
  std::size_t n_mels = 0;
  std::size_t n_frames = 0;
  std::vector<float> values;  // row-major, n_mels rows
  MelParams params;
  /// Lowest value any entry may take: global max minus top_db.
  double floor_db = 0.0;

  float at(std::size_t mel, std::size_t frame) const noexcept { return values[mel * n_frames + frame]; }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

/// Squared STFT magnitude, (n_fft/2 + 1) x n_frames, centred with reflect padding
/// of n_fft/2 on both ends. n_frames = 1 + len / hop.
Matrix stft_power(const audio::AudioClip& clip, const StftParams& params);

/// Triangular filters on the mel axis, area-normalized. n_mels x (n_fft/2 + 1).
/// Throws kDegenerateFilter when a filter row is entirely zero.
Matrix mel_filterbank(const MelParams& params, std::size_t n_fft);

/// Filter centre frequencies in Hz (the n_mels interior mel points).
std::vector<double> mel_center_frequencies(const MelParams& params);

/// Linear-power mel spectrogram: filterbank x stft_power.
Matrix mel_spectrogram(const audio::AudioClip& clip, const StftParams& sp, const MelParams& mp);

/// 10 log10(max(p, amin)), clamped below at (max - top_db).
MelSpectrogram power_to_db(const Matrix& mel_power, const MelParams& params = {},
                           double amin = kAmin, double top_db = kTopDb);

/// Centre-crops or pads (with pad_value, extra column on the right) to target_frames.
Matrix fix_length(const Matrix& spec, std::size_t target_frames, double pad_value);
MelSpectrogram fix_length(const MelSpectrogram& spec, std::size_t target_frames);

/// The full canonical feature path: resample to the mel sample rate, mel power,
/// decibels, fixed length.
MelSpectrogram extract_features(const audio::AudioClip& clip, const StftParams& sp = {},
                                const MelParams& mp = {},
                                std::size_t target_frames = kCanonicalFrames);

/// Feature cache file: "SERF", u32 version (1), u32 n_mels, u32 n_frames, then
/// row-major little-endian float32 values.
inline constexpr std::uint32_t kFeatureCacheVersion = 1;
std::vector<std::uint8_t> encode_feature_cache(const MelSpectrogram& spec);
MelSpectrogram decode_feature_cache(std::span<const std::uint8_t> bytes);
void write_feature_cache(const std::string& path, const MelSpectrogram& spec);
MelSpectrogram read_feature_cache(const std::string& path);

}  // namespace ser::dsp
