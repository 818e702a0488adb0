#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ser::audio {

inline constexpr std::uint32_t kCanonicalSampleRate = 22050;

/// Decoded mono signal. Samples lie in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  std::uint32_t sample_rate = kCanonicalSampleRate;
  std::optional<std::string> source_id;

  double duration_seconds() const noexcept {
    return sample_rate == 0 ? 0.0 : static_cast<double>(samples.size()) / sample_rate;
  }
};

enum class WavEncoding { kPcm16, kFloat32 };

/// Decodes a RIFF/WAVE byte buffer (PCM16 or IEEE float32, one or two channels).
/// Stereo frames are averaged to mono; PCM16 is scaled by 1/32768 and float
/// data is clamped to [-1, 1].
///
/// Throws Error with kMalformedContainer, kUnsupportedEncoding or kEmptyAudio.
AudioClip decode_wav(std::span<const std::uint8_t> bytes);
AudioClip decode_wav(std::span<const char> bytes);

/// Reads and decodes a file; source_id is set to the path.
AudioClip read_wav_file(const std::string& path);

/// Mono WAV encoder. Float32 output round-trips through decode_wav sample-exactly.
std::vector<std::uint8_t> encode_wav(const AudioClip& clip, WavEncoding encoding = WavEncoding::kFloat32);

void write_wav_file(const std::string& path, const AudioClip& clip,
                    WavEncoding encoding = WavEncoding::kFloat32);

/// Band-limited rate conversion with a Kaiser-windowed sinc kernel, 64 taps
/// per polyphase branch. Returns the clip unchanged when rates already match.
/// Output length is ceil(n * target / source).
AudioClip resample(const AudioClip& clip, std::uint32_t target_rate);

}  // namespace ser::audio
