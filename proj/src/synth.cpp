// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ufp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ufp/error.hpp"
#include "ufp/wav.hpp"

namespace ufp {

namespace {
constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

double lerp(double lo, double hi, double u) { return lo + (hi - lo) * u; }
}  // namespace

VoiceProfile speaker_profile(uint64_t seed, int speaker_id) {
  Rng rng(seed, "speaker-profile", static_cast<uint64_t>(speaker_id));
  VoiceProfile v;

  // Pitch is stratified over eight log-spaced cells so nearby speaker ids
  // never collide, with an in-cell jitter draw.
  int cell = speaker_id % 8;
  double lo = 85.0, hi = 230.0;
  double cell_lo = lo * std::pow(hi / lo, cell / 8.0);
  double cell_hi = lo * std::pow(hi / lo, (cell + 1) / 8.0);
  v.f0 = lerp(cell_lo, cell_hi, 0.15 + 0.7 * rng.uniform());

  v.harmonic_rolloff = lerp(0.06, 0.20, rng.uniform());
  v.formant_hz[0] = lerp(420.0, 900.0, rng.uniform());
  v.formant_hz[1] = lerp(1100.0, 2000.0, rng.uniform());
  v.formant_hz[2] = lerp(2300.0, 3200.0, rng.uniform());
  v.formant_bw[0] = lerp(80.0, 150.0, rng.uniform());
  v.formant_bw[1] = lerp(120.0, 250.0, rng.uniform());
  v.formant_bw[2] = lerp(200.0, 350.0, rng.uniform());
  v.formant_gain[0] = lerp(0.8, 1.4, rng.uniform());
  v.formant_gain[1] = lerp(0.4, 0.9, rng.uniform());
  v.formant_gain[2] = lerp(0.2, 0.6, rng.uniform());
  v.vibrato_rate = lerp(4.0, 6.5, rng.uniform());
  v.vibrato_depth = lerp(0.005, 0.02, rng.uniform());
  v.breathiness = lerp(0.001, 0.004, rng.uniform());
  return v;
}

AudioBuffer synth_utterance(const VoiceProfile& voice, double duration_s, int sample_rate,
                            Rng& rng) {
  if (duration_s <= 0.0) throw Error("synth: duration must be positive");
  if (sample_rate <= 0) throw Error("synth: sample rate must be positive");
  int64_t n = static_cast<int64_t>(std::llround(duration_s * sample_rate));
  if (n <= 0) throw Error("synth: duration too short");

  // Per-utterance variation: pitch offset, slow F0 drift, syllable gating
  // and an amplitude wobble. The spectral envelope stays the speaker's.
  double pitch_offset = 1.0 + 0.08 * (rng.uniform() - 0.5);
  double drift_rate = lerp(0.2, 0.7, rng.uniform());
  double drift_depth = lerp(0.01, 0.035, rng.uniform());
  double drift_phase = kTwoPi * rng.uniform();
  double syll_rate = lerp(2.5, 4.0, rng.uniform());
  double syll_phase = kTwoPi * rng.uniform();
  double syll_depth = lerp(0.35, 0.5, rng.uniform());
  double am_rate = lerp(0.5, 1.2, rng.uniform());
  double am_phase = kTwoPi * rng.uniform();
  double vib_phase = kTwoPi * rng.uniform();

  double f0_mean = voice.f0 * pitch_offset;
  int harmonics = std::max(3, std::min(48, static_cast<int>(0.45 * sample_rate * 0.9 / f0_mean)));

  // Static per-harmonic amplitudes: exponential rolloff shaped by the
  // formant resonances at the harmonic's nominal frequency.
  std::vector<double> amp(static_cast<size_t>(harmonics));
  for (int h = 1; h <= harmonics; ++h) {
    double f = h * f0_mean;
    double g = 1.0;
    for (int i = 0; i < 3; ++i) {
      double d = (f - voice.formant_hz[i]) / voice.formant_bw[i];
      g += voice.formant_gain[i] * std::exp(-0.5 * d * d);
    }
    amp[static_cast<size_t>(h - 1)] = std::exp(-voice.harmonic_rolloff * (h - 1)) * g;
  }

  // Instantaneous phase of the fundamental.
  std::vector<double> phase(static_cast<size_t>(n));
  double ph = kTwoPi * rng.uniform();
  for (int64_t t = 0; t < n; ++t) {
    double ts = static_cast<double>(t) / sample_rate;
    double f = f0_mean * (1.0 + drift_depth * std::sin(kTwoPi * drift_rate * ts + drift_phase) +
                          voice.vibrato_depth * std::sin(kTwoPi * voice.vibrato_rate * ts + vib_phase));
    phase[static_cast<size_t>(t)] = ph;
    ph += kTwoPi * f / sample_rate;
  }

  std::vector<double> out(static_cast<size_t>(n), 0.0);
  for (int h = 1; h <= harmonics; ++h) {
    double a = amp[static_cast<size_t>(h - 1)];
    for (int64_t t = 0; t < n; ++t) {
      out[static_cast<size_t>(t)] += a * std::sin(h * phase[static_cast<size_t>(t)]);
    }
  }

  // Envelope: fade edges, syllable gating, slow amplitude wobble.
  double fade = 0.05 * sample_rate;
  for (int64_t t = 0; t < n; ++t) {
    double ts = static_cast<double>(t) / sample_rate;
    double syll = std::sin(kTwoPi * 0.5 * syll_rate * ts + syll_phase);
    double env = (1.0 - syll_depth) + syll_depth * syll * syll;
    env *= 1.0 + 0.15 * std::sin(kTwoPi * am_rate * ts + am_phase);
    double edge = std::min({1.0, static_cast<double>(t) / fade, static_cast<double>(n - 1 - t) / fade});
    out[static_cast<size_t>(t)] *= env * std::max(0.0, edge);
    out[static_cast<size_t>(t)] += voice.breathiness * rng.gaussian();
  }

  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  double scale = peak > 0.0 ? 0.45 / peak : 1.0;
  for (double& v : out) v *= scale;

  return AudioBuffer(std::move(out), sample_rate);
}

std::vector<CorpusEntry> generate_synthetic_corpus(const std::string& out_dir,
                                                   const CorpusSpec& spec) {
  if (spec.n_speakers < 2) throw Error("synth: need at least 2 speakers");
  if (spec.utts_per_speaker < 1) throw Error("synth: need at least 1 utterance per speaker");
  std::filesystem::create_directories(out_dir);

  std::vector<CorpusEntry> entries;
  entries.reserve(static_cast<size_t>(spec.n_speakers) * spec.utts_per_speaker);
  char name[64];
  for (int s = 0; s < spec.n_speakers; ++s) {
    VoiceProfile voice = speaker_profile(spec.seed, s);
    for (int k = 0; k < spec.utts_per_speaker; ++k) {
      Rng rng(spec.seed, "utterance", static_cast<uint64_t>(s), static_cast<uint64_t>(k));
      AudioBuffer x = synth_utterance(voice, spec.duration_s, spec.sample_rate, rng);
      std::snprintf(name, sizeof(name), "spk%02d_utt%03d.wav", s, k);
      write_wav(x, (std::filesystem::path(out_dir) / name).string());
      entries.push_back({name, s});
    }
  }

  std::ofstream mf(std::filesystem::path(out_dir) / "manifest.txt", std::ios::trunc);
  if (!mf) throw Error("synth: cannot write manifest in '" + out_dir + "'");
  for (const CorpusEntry& e : entries) mf << e.file << " " << e.speaker << "\n";
  return entries;
}

std::vector<CorpusEntry> read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("manifest: cannot open '" + path + "'");
  std::vector<CorpusEntry> out;
  std::string line;
  while (std::getline(f, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    CorpusEntry e;
    if (!(ss >> e.file)) continue;
    if (!(ss >> e.speaker)) throw Error("manifest: malformed line in '" + path + "'");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Trial> make_trials(const std::vector<CorpusEntry>& entries, int n_trials,
                               uint64_t seed) {
  if (n_trials < 2) throw Error("trials: need at least 2 trials");

  // Bucket files by speaker.
  std::vector<int> speakers;
  std::vector<std::vector<const CorpusEntry*>> by_speaker;
  for (const CorpusEntry& e : entries) {
    auto it = std::find(speakers.begin(), speakers.end(), e.speaker);
    size_t idx;
    if (it == speakers.end()) {
      speakers.push_back(e.speaker);
      by_speaker.emplace_back();
      idx = speakers.size() - 1;
    } else {
      idx = static_cast<size_t>(it - speakers.begin());
    }
    by_speaker[idx].push_back(&e);
  }
  if (speakers.size() < 2) throw Error("trials: need at least 2 speakers in the manifest");
  bool has_pair = false;
  for (const auto& files : by_speaker) has_pair = has_pair || files.size() >= 2;
  if (!has_pair) throw Error("trials: need a speaker with at least 2 utterances");

  Rng rng(seed, "trial-list");
  std::vector<Trial> out;
  out.reserve(static_cast<size_t>(n_trials));
  int n_same = n_trials / 2;
  for (int i = 0; i < n_trials; ++i) {
    Trial t;
    if (i < n_same) {
      int s;
      do {
        s = rng.uniform_int(0, static_cast<int>(speakers.size()) - 1);
      } while (by_speaker[static_cast<size_t>(s)].size() < 2);
      int a = rng.uniform_int(0, static_cast<int>(by_speaker[static_cast<size_t>(s)].size()) - 1);
      int b;
      do {
        b = rng.uniform_int(0, static_cast<int>(by_speaker[static_cast<size_t>(s)].size()) - 1);
      } while (b == a);
      t.path_a = by_speaker[static_cast<size_t>(s)][static_cast<size_t>(a)]->file;
      t.path_b = by_speaker[static_cast<size_t>(s)][static_cast<size_t>(b)]->file;
      t.label = 1;
    } else {
      int s1 = rng.uniform_int(0, static_cast<int>(speakers.size()) - 1);
      int s2;
      do {
        s2 = rng.uniform_int(0, static_cast<int>(speakers.size()) - 1);
      } while (s2 == s1);
      const auto& fa = by_speaker[static_cast<size_t>(s1)];
      const auto& fb = by_speaker[static_cast<size_t>(s2)];
      t.path_a = fa[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(fa.size()) - 1))]->file;
      t.path_b = fb[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(fb.size()) - 1))]->file;
      t.label = 0;
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace ufp
