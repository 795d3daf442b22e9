// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <fstream>

#include "doctest.h"
#include "test_util.hpp"
#include "ufp/error.hpp"
#include "ufp/wav.hpp"

using namespace ufp;
using testutil::TempDir;

namespace {

void put16(std::vector<uint8_t>& v, uint16_t x) {
  v.push_back(x & 0xff);
  v.push_back((x >> 8) & 0xff);
}
void put32(std::vector<uint8_t>& v, uint32_t x) {
  put16(v, x & 0xffff);
  put16(v, x >> 16);
}

std::vector<uint8_t> wav_bytes(uint16_t format, uint16_t channels, uint32_t rate, uint16_t bits,
                               const std::vector<uint8_t>& data) {
  std::vector<uint8_t> v;
  v.insert(v.end(), {'R', 'I', 'F', 'F'});
  put32(v, 36 + static_cast<uint32_t>(data.size()));
  v.insert(v.end(), {'W', 'A', 'V', 'E'});
  v.insert(v.end(), {'f', 'm', 't', ' '});
  put32(v, 16);
  put16(v, format);
  put16(v, channels);
  put32(v, rate);
  put32(v, rate * channels * bits / 8);
  put16(v, channels * bits / 8);
  put16(v, bits);
  v.insert(v.end(), {'d', 'a', 't', 'a'});
  put32(v, static_cast<uint32_t>(data.size()));
  v.insert(v.end(), data.begin(), data.end());
  return v;
}

std::string dump(const TempDir& dir, const std::string& name, const std::vector<uint8_t>& bytes) {
  std::string path = dir.str(name);
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  return path;
}

}  // namespace

TEST_CASE("pcm16 samples scale by 1/32768") {
  TempDir dir("wav");
  std::vector<uint8_t> data;
  for (int16_t s : {int16_t{0}, int16_t{16384}, int16_t{-32768}}) {
    put16(data, static_cast<uint16_t>(s));
  }
  AudioBuffer buf = read_wav(dump(dir, "a.wav", wav_bytes(1, 1, 16000, 16, data)));
  REQUIRE(buf.size() == 3);
  CHECK(buf.samples[0] == 0.0);
  CHECK(buf.samples[1] == 0.5);
  CHECK(buf.samples[2] == -1.0);
  CHECK(buf.sample_rate == 16000);
}

TEST_CASE("stereo mixes down by channel mean") {
  TempDir dir("wav");
  std::vector<uint8_t> data;
  float left = 1.0f, right = 0.0f;
  uint32_t raw;
  std::memcpy(&raw, &left, 4);
  put32(data, raw);
  std::memcpy(&raw, &right, 4);
  put32(data, raw);
  WavStats stats;
  AudioBuffer buf = read_wav(dump(dir, "st.wav", wav_bytes(3, 2, 16000, 32, data)), &stats);
  REQUIRE(buf.size() == 1);
  CHECK(buf.samples[0] == 0.5);
  CHECK(stats.source_channels == 2);
}

TEST_CASE("float32 decode clips out-of-range samples with a count") {
  TempDir dir("wav");
  std::vector<uint8_t> data;
  for (float s : {0.25f, 1.5f, -2.0f}) {
    uint32_t raw;
    std::memcpy(&raw, &s, 4);
    put32(data, raw);
  }
  WavStats stats;
  AudioBuffer buf = read_wav(dump(dir, "f.wav", wav_bytes(3, 1, 16000, 32, data)), &stats);
  CHECK(buf.samples[0] == 0.25);
  CHECK(buf.samples[1] == 1.0);
  CHECK(buf.samples[2] == -1.0);
  CHECK(stats.clipped == 2);
}

TEST_CASE("truncated riff chunk is a format error") {
  TempDir dir("wav");
  std::vector<uint8_t> data(64, 0);
  auto bytes = wav_bytes(1, 1, 16000, 16, data);
  bytes.resize(bytes.size() - 10);  // cut into the data chunk
  CHECK_THROWS_AS(read_wav(dump(dir, "t.wav", bytes)), Error);
}

TEST_CASE("unsupported encodings are rejected") {
  TempDir dir("wav");
  std::vector<uint8_t> data(8, 0);
  CHECK_THROWS_WITH_AS(read_wav(dump(dir, "u8.wav", wav_bytes(1, 1, 16000, 8, data))),
                       doctest::Contains("unsupported encoding"), Error);
  CHECK_THROWS_WITH_AS(read_wav(dump(dir, "alaw.wav", wav_bytes(6, 1, 8000, 8, data))),
                       doctest::Contains("unsupported encoding"), Error);
}

TEST_CASE("not a wave file") {
  TempDir dir("wav");
  std::vector<uint8_t> junk = {'n', 'o', 'p', 'e', 0, 0, 0, 0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(read_wav(dump(dir, "junk.wav", junk)), Error);
}

TEST_CASE("write/read round trip stays within one quantization step") {
  TempDir dir("wav");
  AudioBuffer x = testutil::noise(4096, 11, 0.95);
  std::string path = dir.str("rt.wav");
  CHECK(write_wav(x, path) == 0);
  AudioBuffer y = read_wav(path);
  REQUIRE(y.size() == x.size());
  CHECK(y.sample_rate == x.sample_rate);
  CHECK(testutil::max_abs_diff(x.samples, y.samples) <= 1.0 / 32768.0);
}

TEST_CASE("writing an empty buffer is a precondition error") {
  TempDir dir("wav");
  AudioBuffer empty;
  CHECK_THROWS_AS(write_wav(empty, dir.str("e.wav")), Error);
}

TEST_CASE("out-of-range samples clip on write with a diagnostic count") {
  TempDir dir("wav");
  AudioBuffer x({0.0, 1.5, -0.5}, 16000);
  std::string path = dir.str("c.wav");
  CHECK(write_wav(x, path) == 1);
  AudioBuffer y = read_wav(path);
  CHECK(y.samples[1] <= 1.0);
  CHECK(y.samples[1] > 0.999);
}
