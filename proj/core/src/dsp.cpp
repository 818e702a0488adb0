#include "ser/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "fft.hpp"
#include "ser/error.hpp"

namespace ser::dsp {
namespace {

// Maps an index into [-pad, len + pad) back into [0, len) by mirror reflection
// about the end samples (the end samples themselves are not repeated).
std::size_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t len) {
  if (len == 1) return 0;
  const std::ptrdiff_t period = 2 * (len - 1);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= len) m = period - m;
  return static_cast<std::size_t>(m);
}

}  // namespace

void StftParams::validate() const {
  if (n_fft == 0 || (n_fft & (n_fft - 1)) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "n_fft must be a power of two");
  }
  if (hop == 0 || hop > n_fft) throw Error(ErrorCode::kInvalidArgument, "hop must satisfy 0 < hop <= n_fft");
}

void MelParams::validate() const {
  if (n_mels == 0) throw Error(ErrorCode::kInvalidArgument, "n_mels must be at least 1");
  if (sample_rate == 0) throw Error(ErrorCode::kInvalidArgument, "sample rate must be positive");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0)) {
    throw Error(ErrorCode::kInvalidArgument, "mel range must satisfy 0 <= f_min < f_max <= sr/2");
  }
}

double hz_to_mel(double hz) {
  if (!(hz >= 0.0)) throw Error(ErrorCode::kDomainError, "frequency must be non-negative");
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double mel_to_hz(double mel) {
  if (!(mel >= 0.0)) throw Error(ErrorCode::kDomainError, "mel value must be non-negative");
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

Matrix stft_power(const audio::AudioClip& clip, const StftParams& params) {
  params.validate();
  if (clip.samples.empty()) throw Error(ErrorCode::kInsufficientSamples, "clip has no samples");

  const std::size_t n_fft = params.n_fft;
  const std::size_t n_bins = n_fft / 2 + 1;
  const auto len = static_cast<std::ptrdiff_t>(clip.samples.size());
  const auto pad = static_cast<std::ptrdiff_t>(n_fft / 2);
  const std::size_t n_frames = 1 + clip.samples.size() / params.hop;

  const detail::FftPlan plan(n_fft);
  const std::vector<double> window = hann_window(n_fft);
  std::vector<std::complex<double>> frame(n_fft);

  Matrix power(n_bins, n_frames);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * params.hop) - pad;
    for (std::size_t n = 0; n < n_fft; ++n) {
      const auto idx = start + static_cast<std::ptrdiff_t>(n);
      const std::size_t src = (idx >= 0 && idx < len) ? static_cast<std::size_t>(idx) : reflect_index(idx, len);
      frame[n] = {window[n] * static_cast<double>(clip.samples[src]), 0.0};
    }
    plan.forward(frame);
    for (std::size_t k = 0; k < n_bins; ++k) power(k, t) = std::norm(frame[k]);
  }
  return power;
}

std::vector<double> mel_center_frequencies(const MelParams& params) {
  params.validate();
  const double lo = hz_to_mel(params.f_min);
  const double hi = hz_to_mel(params.f_max);
  const std::size_t points = params.n_mels + 2;
  std::vector<double> centers(params.n_mels);
  for (std::size_t i = 0; i < params.n_mels; ++i) {
    const double m = lo + (hi - lo) * static_cast<double>(i + 1) / static_cast<double>(points - 1);
    centers[i] = mel_to_hz(m);
  }
  return centers;
}

Matrix mel_filterbank(const MelParams& params, std::size_t n_fft) {
  params.validate();
  if (n_fft == 0 || (n_fft & (n_fft - 1)) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "n_fft must be a power of two");
  }
  const std::size_t n_bins = n_fft / 2 + 1;
  const std::size_t points = params.n_mels + 2;
  const double lo = hz_to_mel(params.f_min);
  const double hi = hz_to_mel(params.f_max);

  std::vector<double> edges(points);
  for (std::size_t i = 0; i < points; ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
  }

  Matrix bank(params.n_mels, n_bins);
  for (std::size_t r = 0; r < params.n_mels; ++r) {
    const double left = edges[r];
    const double center = edges[r + 1];
    const double right = edges[r + 2];
    const double norm = 2.0 / (right - left);
    bool any = false;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * params.sample_rate / static_cast<double>(n_fft);
      const double rising = (f - left) / (center - left);
      const double falling = (right - f) / (right - center);
      const double w = std::max(0.0, std::min(rising, falling));
      bank(r, k) = w * norm;
      any = any || w > 0.0;
    }
    if (!any) {
      throw Error(ErrorCode::kDegenerateFilter,
                  "mel filter " + std::to_string(r) + " (" + std::to_string(left) + "-" +
                      std::to_string(right) + " Hz) covers no FFT bin; use fewer mels or a larger n_fft");
    }
  }
  return bank;
}

Matrix mel_spectrogram(const audio::AudioClip& clip, const StftParams& sp, const MelParams& mp) {
  if (clip.sample_rate != mp.sample_rate) {
    throw Error(ErrorCode::kRateMismatch, "clip is " + std::to_string(clip.sample_rate) +
                                              " Hz, mel params expect " + std::to_string(mp.sample_rate) + " Hz");
  }
  const Matrix bank = mel_filterbank(mp, sp.n_fft);
  const Matrix power = stft_power(clip, sp);

  Matrix mel(bank.rows(), power.cols());
  for (std::size_t r = 0; r < bank.rows(); ++r) {
    auto out = mel.row(r);
    const auto weights = bank.row(r);
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const double w = weights[k];
      if (w == 0.0) continue;
      const auto bin = power.row(k);
      for (std::size_t t = 0; t < out.size(); ++t) out[t] += w * bin[t];
    }
  }
  return mel;
}

MelSpectrogram power_to_db(const Matrix& mel_power, const MelParams& params, double amin, double top_db) {
  MelSpectrogram spec;
  spec.n_mels = mel_power.rows();
  spec.n_frames = mel_power.cols();
  spec.params = params;
  spec.values.resize(mel_power.data().size());

  std::vector<double> db(mel_power.data().size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < db.size(); ++i) {
    const double p = mel_power.data()[i];
    if (p < 0.0) throw Error(ErrorCode::kDomainError, "power entries must be non-negative");
    db[i] = 10.0 * std::log10(std::max(p, amin));
    peak = std::max(peak, db[i]);
  }
  const auto floor = static_cast<float>(peak - top_db);
  spec.floor_db = floor;
  for (std::size_t i = 0; i < db.size(); ++i) {
    spec.values[i] = std::max(static_cast<float>(db[i]), floor);
  }
  return spec;
}

Matrix fix_length(const Matrix& spec, std::size_t target_frames, double pad_value) {
  const std::size_t frames = spec.cols();
  if (frames == 0) throw Error(ErrorCode::kInvalidArgument, "spectrogram has no frames");
  if (frames == target_frames) return spec;

  Matrix out(spec.rows(), target_frames, pad_value);
  if (frames > target_frames) {
    const std::size_t offset = (frames - target_frames) / 2;
    for (std::size_t r = 0; r < spec.rows(); ++r) {
      std::copy_n(spec.row(r).begin() + static_cast<std::ptrdiff_t>(offset), target_frames, out.row(r).begin());
    }
  } else {
    const std::size_t left = (target_frames - frames) / 2;
    for (std::size_t r = 0; r < spec.rows(); ++r) {
      std::copy(spec.row(r).begin(), spec.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(left));
    }
  }
  return out;
}

MelSpectrogram fix_length(const MelSpectrogram& spec, std::size_t target_frames) {
  if (spec.n_frames == 0) throw Error(ErrorCode::kInvalidArgument, "spectrogram has no frames");
  if (spec.n_frames == target_frames) return spec;

  MelSpectrogram out;
  out.n_mels = spec.n_mels;
  out.n_frames = target_frames;
  out.params = spec.params;
  out.floor_db = spec.floor_db;
  out.values.assign(spec.n_mels * target_frames, static_cast<float>(spec.floor_db));

  const bool crop = spec.n_frames > target_frames;
  const std::size_t src_offset = crop ? (spec.n_frames - target_frames) / 2 : 0;
  const std::size_t dst_offset = crop ? 0 : (target_frames - spec.n_frames) / 2;
  const std::size_t count = std::min(spec.n_frames, target_frames);
  for (std::size_t r = 0; r < spec.n_mels; ++r) {
    const float* src = spec.values.data() + r * spec.n_frames + src_offset;
    std::copy_n(src, count, out.values.data() + r * target_frames + dst_offset);
  }
  return out;
}

MelSpectrogram extract_features(const audio::AudioClip& clip, const StftParams& sp, const MelParams& mp,
                                std::size_t target_frames) {
  if (clip.sample_rate != mp.sample_rate) {
    return extract_features(audio::resample(clip, mp.sample_rate), sp, mp, target_frames);
  }
  return fix_length(power_to_db(mel_spectrogram(clip, sp, mp), mp), target_frames);
}

}  // namespace ser::dsp
