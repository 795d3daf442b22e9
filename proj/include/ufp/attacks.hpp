// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

#include "ufp/audio.hpp"
#include "ufp/dsp.hpp"
#include "ufp/encoder.hpp"
#include "ufp/ufp.hpp"

namespace ufp {

// Uniform mid-rise quantization to 256 levels over [-1, 1] and back.
// Idempotent; max per-sample error 1/256.
AudioBuffer quantize_8bit(const AudioBuffer& x);

// 16 kHz -> 8 kHz -> 16 kHz round trip; output trimmed/padded to the input
// length.
AudioBuffer resample_attack(const AudioBuffer& x);

// Magnitude spectrogram -> mel energies -> least-squares mapping back to
// linear bins -> original phase -> istft.
AudioBuffer mel_roundtrip(const AudioBuffer& x, int n_mels, const StftParams& p = {});
AudioBuffer mel_roundtrip(const AudioBuffer& x, const Mat& filterbank, const StftParams& p = {});

// Spectral Wiener gain max(0, 1 - N/|S|^2) with the noise PSD estimated
// from the lowest-energy 10% of frames; phase preserved. Needs >= 10
// frames.
AudioBuffer wiener_denoise(const AudioBuffer& x, const StftParams& p = {});

enum class AttackKind { kNone, kQuantize, kResample, kMelRoundtrip, kDenoise };

struct AttackSpec {
  AttackKind kind = AttackKind::kNone;
  int n_mels = 40;        // mel_roundtrip
  StftParams stft;        // mel_roundtrip / denoise
};

const char* attack_name(AttackKind kind);
AudioBuffer apply_attack(const AudioBuffer& x, const AttackSpec& spec);

struct AttackRow {
  std::string name;
  double evasion = -1.0;  // fraction of attacked-protected files failing
                          // verification against the original
  double spr = -1.0;      // vs clones, when supplied
  double dpr = -1.0;
};

struct AttackTable {
  std::vector<AttackRow> rows;  // "none" first, then the four attacks
  double noise_level = 0.0;
  int frame_len = 0;
  int files = 0;

  std::string to_text() const;
};

void write_attack_table_json(const AttackTable& t, const std::string& path);

// Applies every attack to every protected file and recomputes the verification
// metrics (plus SPR/DPR when clones are given). The "none" row equals the
// plain evaluation on the same files exactly.
AttackTable run_attack_suite(const std::vector<std::string>& original_files,
                             const std::vector<std::string>& protected_files,
                             const std::vector<std::string>& cloned_files, const Ufp& u,
                             double tau, const SpeakerEncoder& encoder);

}  // namespace ufp
