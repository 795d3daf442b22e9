// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ufp/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "ufp/error.hpp"

namespace ufp {

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatIeeeFloat = 3;

uint32_t read_u32le(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

uint16_t read_u16le(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | p[1] << 8);
}

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

void put_u16le(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

}  // namespace

AudioBuffer read_wav(const std::string& path, WavStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("wav: cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error("wav: '" + path + "' is not a RIFF/WAVE file");
  }

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  const uint8_t* data = nullptr;
  uint32_t data_size = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* chunk = bytes.data() + pos;
    uint32_t size = read_u32le(chunk + 4);
    if (pos + 8 + size > bytes.size()) throw Error("wav: truncated chunk in '" + path + "'");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw Error("wav: malformed fmt chunk in '" + path + "'");
      format = read_u16le(chunk + 8);
      channels = read_u16le(chunk + 10);
      rate = read_u32le(chunk + 12);
      bits = read_u16le(chunk + 22);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = size;
    }
    pos += 8 + size + (size & 1);  // chunks are word aligned
  }

  if (!have_fmt || data == nullptr) throw Error("wav: missing fmt or data chunk in '" + path + "'");
  if (channels == 0 || rate == 0) throw Error("wav: malformed fmt chunk in '" + path + "'");
  bool pcm16 = format == kFormatPcm && bits == 16;
  bool float32 = format == kFormatIeeeFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw Error("wav: unsupported encoding in '" + path + "' (format " + std::to_string(format) +
                ", " + std::to_string(bits) + "-bit); need PCM16 or float32");
  }

  uint32_t bytes_per_sample = bits / 8;
  uint32_t frame_size = bytes_per_sample * channels;
  if (data_size % frame_size != 0) throw Error("wav: data size not frame aligned in '" + path + "'");
  uint32_t frames = data_size / frame_size;

  AudioBuffer buf;
  buf.sample_rate = static_cast<int>(rate);
  buf.samples.resize(frames);
  int64_t clipped = 0;
  for (uint32_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (uint16_t c = 0; c < channels; ++c) {
      const uint8_t* p = data + static_cast<size_t>(f) * frame_size + c * bytes_per_sample;
      if (pcm16) {
        int16_t v = static_cast<int16_t>(read_u16le(p));
        acc += static_cast<double>(v) / 32768.0;
      } else {
        float v;
        uint32_t raw = read_u32le(p);
        std::memcpy(&v, &raw, 4);
        acc += static_cast<double>(v);
      }
    }
    double s = acc / channels;
    if (s > 1.0) {
      s = 1.0;
      ++clipped;
    } else if (s < -1.0) {
      s = -1.0;
      ++clipped;
    }
    buf.samples[f] = s;
  }

  if (stats != nullptr) {
    stats->clipped = clipped;
    stats->source_channels = channels;
    stats->source_rate = static_cast<int>(rate);
  }
  return buf;
}

int64_t write_wav(const AudioBuffer& buf, const std::string& path) {
  if (buf.empty()) throw Error("wav: refusing to write an empty buffer to '" + path + "'");
  if (buf.sample_rate <= 0) throw Error("wav: invalid sample rate for '" + path + "'");

  uint32_t frames = static_cast<uint32_t>(buf.samples.size());
  uint32_t data_size = frames * 2;
  std::vector<uint8_t> out;
  out.reserve(44 + data_size);

  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32le(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  put_u32le(out, 16);
  put_u16le(out, kFormatPcm);
  put_u16le(out, 1);  // mono
  put_u32le(out, static_cast<uint32_t>(buf.sample_rate));
  put_u32le(out, static_cast<uint32_t>(buf.sample_rate) * 2);  // byte rate
  put_u16le(out, 2);                                           // block align
  put_u16le(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32le(out, data_size);

  int64_t clipped = 0;
  for (double s : buf.samples) {
    if (s > 1.0) {
      s = 1.0;
      ++clipped;
    } else if (s < -1.0) {
      s = -1.0;
      ++clipped;
    }
    long v = std::lround(s * 32768.0);
    if (v > 32767) v = 32767;
    if (v < -32768) v = -32768;
    put_u16le(out, static_cast<uint16_t>(static_cast<int16_t>(v)));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("wav: cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("wav: write failed for '" + path + "'");
  return clipped;
}

}  // namespace ufp
