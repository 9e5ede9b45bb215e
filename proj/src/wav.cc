// SPDX-License-Identifier: Apache-2.0

#include "dpse/wav.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "dpse/error.h"

namespace dpse {
namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes little-endian");

constexpr uint16_t kPcm = 1;
constexpr uint16_t kFloat = 3;
constexpr uint16_t kExtensible = 0xFFFE;

template <typename T>
T ReadLe(const uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void Put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

WavData ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw Error(ErrorCode::kIo, path + " is not a RIFF/WAVE file");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  size_t data_size = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* chunk = bytes.data() + pos;
    const uint32_t size = ReadLe<uint32_t>(chunk + 4);
    const size_t body = pos + 8;
    const size_t avail = std::min<size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw Error(ErrorCode::kIo, "short fmt chunk in " + path);
      format = ReadLe<uint16_t>(chunk + 8);
      channels = ReadLe<uint16_t>(chunk + 10);
      rate = ReadLe<uint32_t>(chunk + 12);
      bits = ReadLe<uint16_t>(chunk + 22);
      if (format == kExtensible && avail >= 26) format = ReadLe<uint16_t>(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;
    }
    pos = body + size + (size & 1);
  }
  if (data == nullptr || channels == 0) throw Error(ErrorCode::kIo, "no audio data in " + path);
  const bool pcm = format == kPcm && (bits == 16 || bits == 24 || bits == 32);
  const bool flt = format == kFloat && (bits == 32 || bits == 64);
  if (!pcm && !flt)
    throw Error(ErrorCode::kIo, path + ": unsupported sample format " + std::to_string(format) +
                                    "/" + std::to_string(bits) + " bit");

  const size_t width = bits / 8;
  const size_t frames = data_size / (width * channels);
  WavData wav;
  wav.sample_rate = rate;
  wav.channels.assign(channels, std::vector<double>(frames));
  for (size_t i = 0; i < frames; ++i)
    for (size_t c = 0; c < channels; ++c) {
      const uint8_t* p = data + (i * channels + c) * width;
      double v = 0.0;
      if (flt) {
        v = bits == 32 ? double(ReadLe<float>(p)) : ReadLe<double>(p);
      } else if (bits == 16) {
        v = ReadLe<int16_t>(p) / 32768.0;
      } else if (bits == 24) {
        int32_t s = int32_t(uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16);
        if (s & 0x800000) s -= 0x1000000;
        v = s / 8388608.0;
      } else {
        v = ReadLe<int32_t>(p) / 2147483648.0;
      }
      wav.channels[c][i] = v;
    }
  return wav;
}

void WriteWav(const std::string& path, const WavData& wav) {
  if (wav.channels.empty()) throw Error(ErrorCode::kInvalidArgument, "no channels to write");
  const size_t frames = wav.channels[0].size();
  for (const auto& ch : wav.channels)
    if (ch.size() != frames) throw Error(ErrorCode::kChannelLengthMismatch, "ragged channels");
  const uint16_t channels = uint16_t(wav.channels.size());
  const uint32_t rate = uint32_t(wav.sample_rate);
  const uint32_t data_size = uint32_t(frames * channels * 4);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  out.write("RIFF", 4);
  Put<uint32_t>(out, 36 + data_size);
  out.write("WAVEfmt ", 8);
  Put<uint32_t>(out, 16);
  Put<uint16_t>(out, kFloat);
  Put<uint16_t>(out, channels);
  Put<uint32_t>(out, rate);
  Put<uint32_t>(out, rate * channels * 4);
  Put<uint16_t>(out, uint16_t(channels * 4));
  Put<uint16_t>(out, 32);
  out.write("data", 4);
  Put<uint32_t>(out, data_size);
  std::vector<float> interleaved(frames * channels);
  for (size_t i = 0; i < frames; ++i)
    for (size_t c = 0; c < channels; ++c) interleaved[i * channels + c] = float(wav.channels[c][i]);
  out.write(reinterpret_cast<const char*>(interleaved.data()),
            std::streamsize(interleaved.size() * sizeof(float)));
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

}  // namespace dpse
