// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ufp/audio.hpp"
#include "ufp/eval.hpp"
#include "ufp/rng.hpp"

namespace ufp {

// Deterministic parametric voice: fundamental, harmonic rolloff,
// formant-like spectral peaks and vibrato are all drawn once per speaker.
struct VoiceProfile {
  double f0 = 120.0;               // Hz
  double harmonic_rolloff = 0.12;  // per-harmonic exponential decay
  double formant_hz[3] = {600.0, 1400.0, 2800.0};
  double formant_bw[3] = {120.0, 180.0, 280.0};
  double formant_gain[3] = {1.0, 0.7, 0.4};
  double vibrato_rate = 5.0;   // Hz
  double vibrato_depth = 0.01; // relative f0 excursion
  double breathiness = 0.002;  // noise floor amplitude
};

VoiceProfile speaker_profile(uint64_t seed, int speaker_id);

// One utterance: harmonic stack under the speaker's spectral envelope with
// a per-utterance F0 contour, amplitude envelope and soft syllable gating.
AudioBuffer synth_utterance(const VoiceProfile& voice, double duration_s, int sample_rate,
                            Rng& rng);

struct CorpusSpec {
  int n_speakers = 4;
  int utts_per_speaker = 30;
  double duration_s = 3.0;
  uint64_t seed = 1;
  int sample_rate = 16000;
};

struct CorpusEntry {
  std::string file;  // path relative to the corpus directory
  int speaker = 0;
};

// Writes spkSS_uttUUU.wav files plus manifest.txt ("file speaker" lines).
// Byte-reproducible for a fixed spec.
std::vector<CorpusEntry> generate_synthetic_corpus(const std::string& out_dir,
                                                   const CorpusSpec& spec);

std::vector<CorpusEntry> read_manifest(const std::string& path);

// Balanced same/different-speaker pairs sampled without replacement bias;
// paths come out exactly as listed in the entries.
std::vector<Trial> make_trials(const std::vector<CorpusEntry>& entries, int n_trials,
                               uint64_t seed);

}  // namespace ufp
