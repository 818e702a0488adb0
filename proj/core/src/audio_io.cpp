#include "ser/audio_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ser/error.hpp"

namespace ser::audio {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

bool tag_is(const std::uint8_t* p, const char* tag) { return std::memcmp(p, tag, 4) == 0; }

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits_per_sample = 0;
};

FormatChunk parse_fmt(const std::uint8_t* p, std::uint32_t size) {
  if (size < 16) throw Error(ErrorCode::kMalformedContainer, "fmt chunk shorter than 16 bytes");
  FormatChunk fmt;
  fmt.format = read_u16(p);
  fmt.channels = read_u16(p + 2);
  fmt.sample_rate = read_u32(p + 4);
  fmt.block_align = read_u16(p + 12);
  fmt.bits_per_sample = read_u16(p + 14);
  if (fmt.format == kFormatExtensible) {
    // cbSize(2) validBits(2) channelMask(4) then the sub-format GUID whose
    // first two bytes carry the real format tag.
    if (size < 40) throw Error(ErrorCode::kMalformedContainer, "truncated WAVE_FORMAT_EXTENSIBLE");
    fmt.format = read_u16(p + 24);
  }
  return fmt;
}

float pcm16_to_float(const std::uint8_t* p) {
  const auto raw = static_cast<std::int16_t>(read_u16(p));
  return static_cast<float>(raw) / 32768.0f;
}

float f32_from_le(const std::uint8_t* p) {
  return std::bit_cast<float>(read_u32(p));
}

}  // namespace

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes.data(), "RIFF") || !tag_is(bytes.data() + 8, "WAVE")) {
    throw Error(ErrorCode::kMalformedContainer, "missing RIFF/WAVE header");
  }

  std::optional<FormatChunk> fmt;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t chunk_size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (tag_is(chunk, "fmt ")) {
      if (chunk_size > available) throw Error(ErrorCode::kMalformedContainer, "truncated fmt chunk");
      fmt = parse_fmt(chunk + 8, chunk_size);
    } else if (tag_is(chunk, "data")) {
      // Streaming writers leave the size field at 0 or 0xFFFFFFFF.
      data = chunk + 8;
      if (chunk_size == 0 || chunk_size == 0xFFFFFFFFu) {
        data_size = available;
      } else if (chunk_size > available) {
        throw Error(ErrorCode::kMalformedContainer,
                    "data chunk declares " + std::to_string(chunk_size) + " bytes, " +
                        std::to_string(available) + " present");
      } else {
        data_size = chunk_size;
      }
      break;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }

  if (!fmt) throw Error(ErrorCode::kMalformedContainer, "missing fmt chunk");
  if (data == nullptr) throw Error(ErrorCode::kMalformedContainer, "missing data chunk");

  const bool pcm16 = fmt->format == kFormatPcm && fmt->bits_per_sample == 16;
  const bool float32 = fmt->format == kFormatFloat && fmt->bits_per_sample == 32;
  if (!pcm16 && !float32) {
    throw Error(ErrorCode::kUnsupportedEncoding,
                "format tag " + std::to_string(fmt->format) + " with " +
                    std::to_string(fmt->bits_per_sample) + " bits per sample");
  }
  if (fmt->channels != 1 && fmt->channels != 2) {
    throw Error(ErrorCode::kUnsupportedEncoding,
                std::to_string(fmt->channels) + " channels (expected 1 or 2)");
  }
  if (fmt->sample_rate == 0) throw Error(ErrorCode::kMalformedContainer, "sample rate is zero");

  const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
  const std::size_t frame_bytes = bytes_per_sample * fmt->channels;
  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) throw Error(ErrorCode::kEmptyAudio, "data chunk holds no complete frames");

  AudioClip clip;
  clip.sample_rate = fmt->sample_rate;
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::uint8_t* frame = data + f * frame_bytes;
    float value = 0.0f;
    if (fmt->channels == 1) {
      value = pcm16 ? pcm16_to_float(frame) : f32_from_le(frame);
    } else {
      const float left = pcm16 ? pcm16_to_float(frame) : f32_from_le(frame);
      const float right =
          pcm16 ? pcm16_to_float(frame + 2) : f32_from_le(frame + bytes_per_sample);
      value = 0.5f * (left + right);
    }
    if (!(value == value)) value = 0.0f;  // NaN
    clip.samples[f] = std::clamp(value, -1.0f, 1.0f);
  }
  return clip;
}

AudioClip decode_wav(std::span<const char> bytes) {
  return decode_wav(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

AudioClip read_wav_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::vector<char> buffer((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  AudioClip clip = decode_wav(std::span<const char>(buffer));
  clip.source_id = path;
  return clip;
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip, WavEncoding encoding) {
  const bool pcm16 = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm16 ? 16 : 32;
  const std::uint16_t block_align = bits / 8;
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * block_align);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, pcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, 1);
  put_u32(out, clip.sample_rate);
  put_u32(out, clip.sample_rate * block_align);
  put_u16(out, block_align);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (float s : clip.samples) {
    if (pcm16) {
      const double scaled = std::clamp(static_cast<double>(s) * 32768.0, -32768.0, 32767.0);
      const auto v = static_cast<std::int16_t>(std::lround(scaled));
      put_u16(out, static_cast<std::uint16_t>(v));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(s));
    }
  }
  return out;
}

void write_wav_file(const std::string& path, const AudioClip& clip, WavEncoding encoding) {
  const auto bytes = encode_wav(clip, encoding);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "short write to " + path);
}

}  // namespace ser::audio
