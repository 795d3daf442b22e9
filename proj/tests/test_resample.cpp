// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "ufp/error.hpp"
#include "ufp/resample.hpp"

using namespace ufp;
namespace tu = testutil;

TEST_CASE("same target rate returns the input untouched") {
  AudioBuffer x = tu::noise(1000, 3);
  AudioBuffer y = resample(x, 16000);
  CHECK(y.samples == x.samples);
}

TEST_CASE("output length is round(len * target / source)") {
  for (int64_t len : {16000, 16001, 16007, 12345}) {
    AudioBuffer x = tu::noise(len, 5);
    AudioBuffer y = resample(x, 8000);
    CHECK(y.size() == std::llround(static_cast<double>(len) * 8000 / 16000));
  }
  AudioBuffer x = tu::noise(8000, 6, 0.3, 8000);
  CHECK(resample(x, 16000).size() == 16000);
  CHECK(resample(tu::noise(44100, 7, 0.3, 44100), 16000).size() == 16000);
}

TEST_CASE("1 kHz sinusoid survives a 16k->8k->16k round trip") {
  AudioBuffer x = tu::tone(1000.0, 2.0, 16000, 0.5, 0.02);
  AudioBuffer y = resample(resample(x, 8000), 16000);
  REQUIRE(y.size() == x.size());
  CHECK(tu::correlation(x.samples, y.samples) >= 0.99);
}

TEST_CASE("content above the intermediate nyquist is eliminated") {
  AudioBuffer x = tu::tone(7900.0, 1.0, 16000, 0.5, 0.02);
  AudioBuffer y = resample(x, 8000);
  double in_power = 0.0, out_power = 0.0;
  for (double v : x.samples) in_power += v * v;
  for (double v : y.samples) out_power += v * v;
  in_power /= static_cast<double>(x.size());
  out_power /= static_cast<double>(y.size());
  CHECK(out_power <= 1e-4 * in_power);
}

TEST_CASE("in-band power is preserved within 1%") {
  // band-limited mix well below 4 kHz
  AudioBuffer x = tu::tone(440.0, 2.0, 16000, 0.3, 0.05);
  AudioBuffer b = tu::tone(1330.0, 2.0, 16000, 0.2, 0.05);
  for (size_t i = 0; i < x.samples.size(); ++i) x.samples[i] += b.samples[i];
  AudioBuffer y = resample(x, 8000);
  double in_power = 0.0, out_power = 0.0;
  for (double v : x.samples) in_power += v * v;
  for (double v : y.samples) out_power += v * v;
  in_power /= static_cast<double>(x.size());
  out_power /= static_cast<double>(y.size());
  CHECK(out_power == doctest::Approx(in_power).epsilon(0.01));
}

TEST_CASE("resampling is linear") {
  AudioBuffer x = tu::noise(9000, 21);
  AudioBuffer y = tu::noise(9000, 22);
  AudioBuffer mix = x;
  for (size_t i = 0; i < mix.samples.size(); ++i) {
    mix.samples[i] = 1.7 * x.samples[i] - 0.4 * y.samples[i];
  }
  AudioBuffer rx = resample(x, 8000);
  AudioBuffer ry = resample(y, 8000);
  AudioBuffer rmix = resample(mix, 8000);
  double worst = 0.0;
  for (size_t i = 0; i < rmix.samples.size(); ++i) {
    worst = std::max(worst, std::abs(rmix.samples[i] - (1.7 * rx.samples[i] - 0.4 * ry.samples[i])));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("preconditions") {
  AudioBuffer x = tu::noise(100, 1);
  CHECK_THROWS_AS(resample(x, 0), Error);
  AudioBuffer empty;
  CHECK_THROWS_AS(resample(empty, 8000), Error);
}
