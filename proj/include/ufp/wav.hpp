// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>

#include "ufp/audio.hpp"

namespace ufp {

struct WavStats {
  int64_t clipped = 0;      // samples clamped to [-1, 1]
  int source_channels = 1;  // before mono mixdown
  int source_rate = 0;
};

// Reads a RIFF/WAVE file (PCM16 or IEEE float32, any channel count) and
// canonicalizes: mixdown to mono by channel mean, 1/32768 scaling for
// integer samples, magnitudes clamped to 1 with a clip diagnostic.
AudioBuffer read_wav(const std::string& path, WavStats* stats = nullptr);

// Writes mono PCM16. Returns the number of samples clipped to [-1, 1].
int64_t write_wav(const AudioBuffer& buf, const std::string& path);

}  // namespace ufp
