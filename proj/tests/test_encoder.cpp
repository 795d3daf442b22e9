// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "ufp/encoder.hpp"
#include "ufp/error.hpp"
#include "ufp/synth.hpp"

using namespace ufp;
namespace tu = testutil;

namespace {

EncoderConfig toy_config() {
  EncoderConfig cfg;
  cfg.n_mels = 16;
  cfg.dim = 8;
  cfg.projection_seed = 77;
  cfg.stft = StftParams{256, 64};
  return cfg;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

TEST_CASE("embedding is deterministic and unit norm") {
  LogMelEncoder enc(toy_config(), 16000);
  AudioBuffer x = tu::noise(8000, 201);
  Embedding a = enc.embed(x);
  Embedding b = enc.embed(x);
  CHECK(a.values == b.values);
  CHECK(std::abs(tu::l2(a.values) - 1.0) < 1e-9);
  CHECK(a.dim() == 8);
}

TEST_CASE("cosine similarity closed forms") {
  Embedding a{{1.0, 0.0, 0.0}};
  Embedding b{{0.0, 1.0, 0.0}};
  Embedding na{{-1.0, 0.0, 0.0}};
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
  CHECK(cosine_similarity(a, b) == doctest::Approx(0.0));
  CHECK(cosine_similarity(a, na) == doctest::Approx(-1.0));
  Embedding zero{{0.0, 0.0, 0.0}};
  CHECK_THROWS_AS(cosine_similarity(a, zero), Error);

  // the formula normalizes, so pre-normalization scale cannot matter
  Embedding a3{{3.0, 0.0, 0.0}};
  Embedding bh{{0.0, 0.5, 0.0}};
  Embedding mix{{0.6, 0.8, 0.0}};
  CHECK(cosine_similarity(a3, mix) == doctest::Approx(cosine_similarity(a, mix)));
  CHECK(cosine_similarity(bh, mix) == doctest::Approx(cosine_similarity(b, mix)));
}

TEST_CASE("speakers separate under the surrogate encoder") {
  EncoderConfig cfg;
  cfg.n_mels = 40;
  cfg.dim = 64;
  cfg.projection_seed = 5;
  LogMelEncoder enc(cfg, 16000);

  const int utts = 5;
  std::vector<Embedding> s0, s1;
  VoiceProfile v0 = speaker_profile(400, 0);
  VoiceProfile v1 = speaker_profile(400, 1);
  for (int k = 0; k < utts; ++k) {
    Rng r0(400, "utt-a", static_cast<uint64_t>(k));
    Rng r1(400, "utt-b", static_cast<uint64_t>(k));
    s0.push_back(enc.embed(synth_utterance(v0, 1.5, 16000, r0)));
    s1.push_back(enc.embed(synth_utterance(v1, 1.5, 16000, r1)));
  }

  double within = 0.0, cross = 0.0;
  int nw = 0, nc = 0;
  for (int i = 0; i < utts; ++i) {
    for (int j = 0; j < utts; ++j) {
      if (i < j) {
        within += cosine_similarity(s0[static_cast<size_t>(i)], s0[static_cast<size_t>(j)]);
        within += cosine_similarity(s1[static_cast<size_t>(i)], s1[static_cast<size_t>(j)]);
        nw += 2;
      }
      cross += cosine_similarity(s0[static_cast<size_t>(i)], s1[static_cast<size_t>(j)]);
      ++nc;
    }
  }
  REQUIRE(nw + nc >= 40);
  CHECK(within / nw > cross / nc);
}

TEST_CASE("embed adjoint matches finite differences") {
  LogMelEncoder enc(toy_config(), 16000);
  AudioBuffer x = tu::noise(2000, 202);

  Rng rng(203, "functional");
  std::vector<double> c(8);
  for (double& v : c) v = rng.gaussian();

  std::vector<double> g = enc.embed_adjoint(x, c);
  REQUIRE(g.size() == x.samples.size());

  auto f = [&](const AudioBuffer& in) { return dot(c, enc.embed(in).values); };
  double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    int idx = rng.uniform_int(0, static_cast<int>(x.size()) - 1);
    AudioBuffer plus = x, minus = x;
    plus.samples[static_cast<size_t>(idx)] += h;
    minus.samples[static_cast<size_t>(idx)] -= h;
    double fd = (f(plus) - f(minus)) / (2.0 * h);
    double an = g[static_cast<size_t>(idx)];
    if (std::abs(fd) < 1e-10) {
      CHECK(std::abs(an) < 1e-7);
    } else {
      CHECK(an == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

TEST_CASE("zero upstream gradient gives a zero sample gradient") {
  LogMelEncoder enc(toy_config(), 16000);
  AudioBuffer x = tu::noise(2000, 204);
  std::vector<double> zero(8, 0.0);
  for (double v : enc.embed_adjoint(x, zero)) CHECK(v == 0.0);
}

TEST_CASE("radial upstream dies in the normalization") {
  // l2 normalization projects out the radial direction, so an upstream
  // equal to the embedding itself must produce a (numerically) zero
  // gradient.
  LogMelEncoder enc(toy_config(), 16000);
  AudioBuffer x = tu::noise(2000, 205);
  Embedding e = enc.embed(x);
  std::vector<double> g = enc.embed_adjoint(x, e.values);
  for (double v : g) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("gradient check survives a constant input (std epsilon)") {
  LogMelEncoder enc(toy_config(), 16000);
  AudioBuffer x(std::vector<double>(2000, 0.125), 16000);
  Embedding e = enc.embed(x);
  for (double v : e.values) CHECK(std::isfinite(v));

  Rng rng(206, "c");
  std::vector<double> c(8);
  for (double& v : c) v = rng.gaussian();
  std::vector<double> g = enc.embed_adjoint(x, c);
  for (double v : g) CHECK(std::isfinite(v));

  auto f = [&](const AudioBuffer& in) { return dot(c, enc.embed(in).values); };
  double h = 1e-6;
  for (int idx : {100, 500, 1200}) {
    AudioBuffer plus = x, minus = x;
    plus.samples[static_cast<size_t>(idx)] += h;
    minus.samples[static_cast<size_t>(idx)] -= h;
    double fd = (f(plus) - f(minus)) / (2.0 * h);
    CHECK(g[static_cast<size_t>(idx)] == doctest::Approx(fd).epsilon(1e-3).scale(1e-6));
  }
}

TEST_CASE("config validation") {
  EncoderConfig cfg = toy_config();
  cfg.dim = 33;  // > 2*n_mels
  CHECK_THROWS_AS(LogMelEncoder(cfg, 16000), Error);

  LogMelEncoder enc(toy_config(), 16000);
  AudioBuffer wrong_rate = tu::noise(2000, 207, 0.3, 8000);
  CHECK_THROWS_AS(enc.embed(wrong_rate), Error);
  AudioBuffer too_short = tu::noise(100, 208);
  CHECK_THROWS_AS(enc.embed(too_short), Error);
}
