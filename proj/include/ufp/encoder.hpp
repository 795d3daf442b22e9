// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <vector>

#include "ufp/audio.hpp"
#include "ufp/dsp.hpp"
#include "ufp/mat.hpp"

namespace ufp {

// Unit-norm speaker feature vector.
struct Embedding {
  std::vector<double> values;
  int dim() const { return static_cast<int>(values.size()); }
};

// Exact cosine similarity; throws on a zero vector.
double cosine_similarity(const Embedding& a, const Embedding& b);

struct EncoderConfig {
  int n_mels = 40;
  int dim = 64;  // must be <= 2*n_mels
  uint64_t projection_seed = 7;
  StftParams stft;
};

// Pluggable encoder contract so an external verifier can replace the
// built-in one without touching the optimizer or the metrics.
class SpeakerEncoder {
 public:
  virtual ~SpeakerEncoder() = default;
  virtual Embedding embed(const AudioBuffer& x) const = 0;
  // Reverse-mode gradient of <upstream, embed(x)> with respect to samples.
  virtual std::vector<double> embed_adjoint(const AudioBuffer& x,
                                            const std::vector<double>& upstream) const = 0;
  virtual int dim() const = 0;
  // The rate the encoder's features are defined at; callers resample inputs
  // to it before embedding.
  virtual int sample_rate() const = 0;
};

// Deterministic, analytically differentiable surrogate verifier:
// log-mel energies, temporal mean/std pooling, a fixed seeded orthonormal
// projection, and l2 normalization.
class LogMelEncoder final : public SpeakerEncoder {
 public:
  LogMelEncoder(const EncoderConfig& cfg, int sample_rate);

  Embedding embed(const AudioBuffer& x) const override;
  std::vector<double> embed_adjoint(const AudioBuffer& x,
                                    const std::vector<double>& upstream) const override;
  int dim() const override { return cfg_.dim; }
  int sample_rate() const override { return sample_rate_; }

  const EncoderConfig& config() const { return cfg_; }
  uint64_t config_hash() const;

 private:
  EncoderConfig cfg_;
  int sample_rate_;
  Mat mel_;   // n_mels x B
  Mat proj_;  // dim x 2*n_mels, orthonormal rows
  std::vector<int> row_lo_, row_hi_;  // nonzero bin range per mel filter
};

}  // namespace ufp
