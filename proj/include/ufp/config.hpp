// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>

#include "ufp/dsp.hpp"
#include "ufp/encoder.hpp"
#include "ufp/optim.hpp"

namespace ufp {

// Fully resolved run configuration: defaults <- config file <- flags,
// rightmost wins. Sub-seeds (training stream, encoder projection) derive
// from the single top-level seed unless pinned explicitly.
struct RunConfig {
  StftParams stft;
  int n_mels = 40;
  int encoder_dim = 64;
  uint64_t projection_seed = 0;  // 0 = derive from seed
  int frame_len = 120;           // L_u
  double noise_level = 0.4;      // eta
  int smoother_k = 5;
  TrainConfig train;
  double train_ratio = 0.7;
  double mask_cap = 0.0;  // > 0 enables a uniform per-bin box constraint
  uint64_t seed = 1;
  int sample_rate = 16000;
  int threads = 0;  // 0 = UFP_THREADS env or hardware

  EncoderConfig encoder_config() const;
  TrainConfig train_config() const;  // with derived seed and caps applied
};

// Line-oriented `key = value` text with [section] headers and '#' comments.
void apply_config_file(RunConfig& cfg, const std::string& path);

// Applies one dotted key ("train.lambda"); throws naming the key.
void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

// Rejects invalid combinations with a message naming the offending key.
void validate_config(const RunConfig& cfg);

// Human-readable echo of every resolved key.
std::string config_echo(const RunConfig& cfg);

}  // namespace ufp
