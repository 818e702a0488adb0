#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "ser/audio_io.hpp"
#include "ser/error.hpp"

namespace ser::audio {
namespace {

constexpr int kTaps = 64;
constexpr int kHalfTaps = kTaps / 2;
constexpr double kKaiserBeta = 8.0;
constexpr double kRolloff = 0.94;
// Above this many phases the kernel is evaluated per output sample instead of tabulated.
constexpr std::uint64_t kMaxTabulatedPhases = 4096;

using Branch = std::array<double, kTaps>;

class SincKernel {
 public:
  explicit SincKernel(double cutoff) : cutoff_(cutoff), i0_beta_(std::cyl_bessel_i(0.0, kKaiserBeta)) {}

  /// Taps for input offsets j = -(kHalfTaps-1) .. kHalfTaps relative to floor(t),
  /// where frac = t - floor(t). Normalized to unit DC gain.
  Branch branch(double frac) const {
    Branch taps{};
    double sum = 0.0;
    for (int k = 0; k < kTaps; ++k) {
      const double tau = static_cast<double>(k - (kHalfTaps - 1)) - frac;
      taps[k] = weight(tau);
      sum += taps[k];
    }
    for (double& t : taps) t /= sum;
    return taps;
  }

 private:
  double weight(double tau) const {
    const double r = tau / kHalfTaps;
    if (std::abs(r) >= 1.0) return 0.0;
    const double x = 2.0 * cutoff_ * tau;
    const double sinc = x == 0.0 ? 1.0 : std::sin(M_PI * x) / (M_PI * x);
    const double window = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) / i0_beta_;
    return 2.0 * cutoff_ * sinc * window;
  }

  double cutoff_;
  double i0_beta_;
};

}  // namespace

AudioClip resample(const AudioClip& clip, std::uint32_t target_rate) {
  if (target_rate == 0) throw Error(ErrorCode::kInvalidArgument, "target rate must be positive");
  if (clip.sample_rate == 0) throw Error(ErrorCode::kInvalidArgument, "source rate must be positive");
  if (clip.sample_rate == target_rate) return clip;

  const std::uint64_t g = std::gcd(clip.sample_rate, target_rate);
  const std::uint64_t up = target_rate / g;
  const std::uint64_t down = clip.sample_rate / g;

  const auto n_in = static_cast<std::int64_t>(clip.samples.size());
  const auto n_out = static_cast<std::size_t>((static_cast<std::uint64_t>(n_in) * up + down - 1) / down);

  const double cutoff = 0.5 * std::min(1.0, static_cast<double>(up) / static_cast<double>(down)) * kRolloff;
  const SincKernel kernel(cutoff);

  std::vector<Branch> table;
  if (up <= kMaxTabulatedPhases) {
    table.reserve(up);
    for (std::uint64_t p = 0; p < up; ++p) table.push_back(kernel.branch(static_cast<double>(p) / up));
  }

  AudioClip out;
  out.sample_rate = target_rate;
  out.source_id = clip.source_id;
  out.samples.resize(n_out);

  const float* x = clip.samples.data();
  for (std::size_t n = 0; n < n_out; ++n) {
    const std::uint64_t pos = static_cast<std::uint64_t>(n) * down;
    const auto base = static_cast<std::int64_t>(pos / up);
    const std::uint64_t phase = pos % up;
    const Branch local = table.empty() ? kernel.branch(static_cast<double>(phase) / up) : Branch{};
    const Branch& taps = table.empty() ? local : table[phase];

    double acc = 0.0;
    const std::int64_t first = base - (kHalfTaps - 1);
    const int k_lo = static_cast<int>(std::max<std::int64_t>(0, -first));
    const int k_hi = static_cast<int>(std::min<std::int64_t>(kTaps, n_in - first));
    for (int k = k_lo; k < k_hi; ++k) acc += taps[k] * x[first + k];
    out.samples[n] = static_cast<float>(std::clamp(acc, -1.0, 1.0));
  }
  return out;
}

}  // namespace ser::audio
