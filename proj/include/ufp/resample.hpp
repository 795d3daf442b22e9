// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "ufp/audio.hpp"

namespace ufp {

// Band-limited rational resampling with a Blackman-windowed sinc, evaluated
// polyphase. Output length is round(len * target / source). Linear in the
// input; DC gain exactly one per phase.
AudioBuffer resample(const AudioBuffer& buf, int target_rate);

}  // namespace ufp
