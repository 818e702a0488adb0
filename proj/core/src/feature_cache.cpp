#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ser/dsp.hpp"
#include "ser/error.hpp"

namespace ser::dsp {
namespace {

constexpr char kMagic[4] = {'S', 'E', 'R', 'F'};
constexpr std::size_t kHeaderBytes = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_feature_cache(const MelSpectrogram& spec) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * spec.values.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kFeatureCacheVersion);
  put_u32(out, static_cast<std::uint32_t>(spec.n_mels));
  put_u32(out, static_cast<std::uint32_t>(spec.n_frames));
  for (float v : spec.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

MelSpectrogram decode_feature_cache(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kTruncatedFile, "feature cache header missing");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kFeatureCacheVersion) {
    throw Error(ErrorCode::kVersionMismatch, "feature cache version " + std::to_string(version) +
                                                 ", expected " + std::to_string(kFeatureCacheVersion));
  }
  MelSpectrogram spec;
  spec.n_mels = get_u32(bytes.data() + 8);
  spec.n_frames = get_u32(bytes.data() + 12);
  const std::size_t count = spec.n_mels * spec.n_frames;
  if (bytes.size() != kHeaderBytes + 4 * count) {
    throw Error(ErrorCode::kTruncatedFile, "feature cache holds " + std::to_string(bytes.size()) +
                                               " bytes, expected " + std::to_string(kHeaderBytes + 4 * count));
  }
  spec.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    spec.values[i] = std::bit_cast<float>(get_u32(bytes.data() + kHeaderBytes + 4 * i));
  }
  spec.params.n_mels = spec.n_mels;
  spec.floor_db = count == 0 ? 0.0 : *std::min_element(spec.values.begin(), spec.values.end());
  return spec;
}

void write_feature_cache(const std::string& path, const MelSpectrogram& spec) {
  const auto bytes = encode_feature_cache(spec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

MelSpectrogram read_feature_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_feature_cache(bytes);
}

}  // namespace ser::dsp
